"""Verdicts and pass-rate aggregation.

``judge`` never raises on a bad answer: every failure mode becomes an
Incorrect verdict with a cause, so a long campaign survives any single
question. Multi-turn questions are judged independently; the runner seeds
each turn's session with the reference solutions of the preceding turns,
so an earlier wrong answer cannot poison a later verdict.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .corpus import GroundTruth
from .sandbox import SandboxHandle, SandboxRequest, SandboxResponse

CAUSES = (
    "match",
    "value_mismatch",
    "execution_error",
    "timeout",
    "extraction_empty",
    "checker_failure",
)

DEFAULT_NUMERICAL_TOLERANCE = 0.01


class EvaluatorError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class Verdict:
    tag: str
    cause: str
    detail: str = ""

    def __post_init__(self) -> None:
        if self.cause not in CAUSES:
            raise EvaluatorError(f"unknown cause {self.cause!r}")
        if (self.tag == "Correct") != (self.cause == "match"):
            raise EvaluatorError("tag is Correct iff cause is match")

    def to_record(self) -> dict:
        return {"tag": self.tag, "cause": self.cause, "detail": self.detail}


def _correct(detail: str = "") -> Verdict:
    return Verdict(tag="Correct", cause="match", detail=detail)


def _incorrect(cause: str, detail: str = "") -> Verdict:
    return Verdict(tag="Incorrect", cause=cause, detail=detail)


_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def last_numeric_token(text: str) -> float | None:
    """The last number appearing in ``text``, or None.

    Generated programs usually print prose plus the answer; the final
    number is taken as the answer.
    """
    matches = _NUMBER_RE.findall(text)
    if not matches:
        return None
    return float(matches[-1])


def judge(
    execution: SandboxResponse,
    truth: GroundTruth,
    sandbox: SandboxHandle | None = None,
    workdir: str = ".",
) -> Verdict:
    """Compare an execution result against ground truth."""
    if execution.status == "timeout":
        return _incorrect("timeout", f"exceeded limit after {execution.duration_s:.1f}s")
    if execution.status == "error":
        return _incorrect("execution_error", execution.stderr[-2000:])

    output = execution.final_value or execution.stdout

    if truth.kind == "numerical":
        value = last_numeric_token(output)
        if value is None:
            return _incorrect("value_mismatch", f"no numeric token in output: {output!r}")
        expected = float(truth.expected)
        tolerance = truth.tolerance if truth.tolerance is not None else DEFAULT_NUMERICAL_TOLERANCE
        if abs(value - expected) <= tolerance * max(1.0, abs(expected)):
            return _correct(f"{value} within {tolerance} of {expected}")
        return _incorrect("value_mismatch", f"got {value}, expected {expected}")

    if truth.kind == "multiple_choice":
        if output.strip().casefold() == truth.expected.strip().casefold():
            return _correct()
        return _incorrect("value_mismatch", f"got {output.strip()!r}, expected {truth.expected!r}")

    if truth.kind == "value_literal":
        if output.strip() == truth.expected.strip():
            return _correct()
        return _incorrect("value_mismatch", f"got {output.strip()!r}, expected {truth.expected!r}")

    # checker_script: semantic comparison is delegated to the sandbox.
    if sandbox is None:
        return _incorrect("checker_failure", "no sandbox available for checker")
    response = sandbox.request(
        SandboxRequest(
            op="check",
            code=truth.expected,  # checker path relative to workdir
            workdir=workdir,
            candidate_output=output,
        )
    )
    if response.status != "ok":
        return _incorrect("checker_failure", response.stderr[-2000:])
    if response.final_value.strip() == "PASS":
        return _correct("checker passed")
    return _incorrect("value_mismatch", f"checker said {response.final_value.strip()!r}")


@dataclass(frozen=True, slots=True)
class QuestionMeta:
    set_id: str
    task_id: str
    answer_kind: str
    category: str | None = None


@dataclass(slots=True)
class PassRateReport:
    overall: float
    counts: dict[str, tuple[int, int]]  # cell -> (numerator, denominator)
    by_answer_kind: dict[str, float] = field(default_factory=dict)
    by_category: dict[str, float] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "overall": self.overall,
            "by_answer_kind": self.by_answer_kind,
            "by_category": self.by_category,
            "counts": {k: list(v) for k, v in self.counts.items()},
        }


def pass_rate(verdicts: list[tuple[Verdict, QuestionMeta]]) -> PassRateReport:
    """Aggregate verdicts into overall and per-partition pass rates.

    Every question counts once, multi-turn ones individually and
    independently.
    """
    if not verdicts:
        raise EvaluatorError("cannot aggregate an empty verdict list")

    def tally(pairs) -> tuple[int, int]:
        total = 0
        correct = 0
        for verdict, _ in pairs:
            total += 1
            correct += verdict.tag == "Correct"
        return correct, total

    overall_num, overall_den = tally(verdicts)
    counts: dict[str, tuple[int, int]] = {"overall": (overall_num, overall_den)}

    by_answer_kind: dict[str, float] = {}
    for kind in sorted({m.answer_kind for _, m in verdicts}):
        num, den = tally([(v, m) for v, m in verdicts if m.answer_kind == kind])
        counts[f"kind:{kind}"] = (num, den)
        by_answer_kind[kind] = num / den

    by_category: dict[str, float] = {}
    for category in sorted({m.category for _, m in verdicts if m.category is not None}):
        num, den = tally([(v, m) for v, m in verdicts if m.category == category])
        counts[f"category:{category}"] = (num, den)
        by_category[category] = num / den

    return PassRateReport(
        overall=overall_num / overall_den,
        counts=counts,
        by_answer_kind=by_answer_kind,
        by_category=by_category,
    )
