"""Difficulty assessment for problem sets.

Four interchangeable metrics produce comparable ``DifficultyAssessment``
records (higher score = harder):

* ``problem_based``: an LLM judges each set from its descriptions alone,
  guided by a rubric. No reference code or ground truth ever reaches the
  prompt.
* ``reference_code``: structural counts (functions, assigned variables,
  conditionals, loops) of the reference solution, via the sandbox's
  analyzer.
* ``pass_rate``: 1 minus a weaker model's observed pass rate with no
  memory retrieval.
* ``manual``: supplied easy/medium/hard labels, human pass rate as the
  tie-break.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus, ProblemSet
from .gateway import ChatGateway, ChatRequest
from .sandbox import SandboxHandle, SandboxRequest

METRICS = ("problem_based", "reference_code", "pass_rate", "manual")

DEFAULT_RUBRIC = """\
Rate the difficulty of the data-science problem below on an integer scale
from {scale_min} (easiest) to {scale_max} (hardest). Consider how many
concepts must be combined, how much data manipulation is required, and how
precise the required output format is. Levels {scale_min}-3 are direct
lookups or single-step filters; 4-6 require combining two or three
operations (grouping, joining, aggregation); 7-{scale_max} require
multi-step reasoning, counting or statistical inference, or careful
edge-case handling. Respond with a line of the form
"Difficulty: <number> - <one-sentence reason>"."""


class DifficultyError(Exception):
    pass


class UnparseableJudgment(DifficultyError):
    """Raised when the model's difficulty reply cannot be parsed; carries
    the raw response text."""

    def __init__(self, raw_response: str) -> None:
        super().__init__(f"could not parse a difficulty score from: {raw_response!r}")
        self.raw_response = raw_response


@dataclass(frozen=True, slots=True)
class DifficultyAssessment:
    set_id: str
    score: float
    metric: str
    rationale: str = ""
    secondary_key: float = 0.0

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise DifficultyError(f"unknown metric {self.metric!r}")

    def to_record(self) -> dict:
        return {
            "set_id": self.set_id,
            "score": self.score,
            "metric": self.metric,
            "rationale": self.rationale,
            "secondary_key": self.secondary_key,
        }

    @classmethod
    def from_record(cls, record: dict) -> "DifficultyAssessment":
        return cls(
            set_id=record["set_id"],
            score=record["score"],
            metric=record["metric"],
            rationale=record.get("rationale", ""),
            secondary_key=record.get("secondary_key", 0.0),
        )


@dataclass(frozen=True, slots=True)
class DifficultyGuidelines:
    rubric_text: str
    scale_min: int = 1
    scale_max: int = 10

    def __post_init__(self) -> None:
        if self.scale_min >= self.scale_max:
            raise DifficultyError("scale_min must be < scale_max")

    @classmethod
    def default(cls) -> "DifficultyGuidelines":
        return cls(rubric_text=DEFAULT_RUBRIC.format(scale_min=1, scale_max=10))


def _load_template(override_path: Path | str | None, name: str) -> str:
    if override_path is not None:
        return Path(override_path).read_text(encoding="utf-8")
    from importlib import resources

    return (resources.files("dsagent") / "templates" / name).read_text(encoding="utf-8")


_SCORE_RE = re.compile(r"Difficulty:\s*(-?\d+)", re.IGNORECASE)


def _parse_judgment(response: str) -> tuple[int, str]:
    match = _SCORE_RE.search(response)
    if match is None:
        raise UnparseableJudgment(response)
    score = int(match.group(1))
    rationale = response[match.end():].lstrip(" \t-–—:.").strip()
    return score, rationale


def assess_problem_based(
    problem_set: ProblemSet,
    guidelines: DifficultyGuidelines,
    gateway: ChatGateway,
    model_id: str = "default",
    template_path: Path | str | None = None,
) -> DifficultyAssessment:
    """LLM difficulty judgment from problem descriptions only.

    Multi-turn sets are judged once, on all turn descriptions concatenated
    in turn order. An unparseable reply earns exactly one reprompt, then a
    hard :class:`UnparseableJudgment`.
    """
    descriptions = "\n\n".join(task.description for task in problem_set.tasks)
    template = _load_template(template_path, "difficulty_prompt.txt")
    prompt = template.format(rubric=guidelines.rubric_text, descriptions=descriptions)

    def ask(extra: str = "") -> str:
        return gateway.complete(
            ChatRequest(
                system_instruction="You assess the difficulty of data-science problems.",
                messages=(("user", prompt + extra),),
                temperature=0.0,
                model_id=model_id,
            )
        )

    response = ask()
    try:
        score, rationale = _parse_judgment(response)
    except UnparseableJudgment:
        response = ask(
            '\n\nYour previous reply was not parseable. Answer again with a '
            'single line of the form "Difficulty: <number> - <reason>".'
        )
        score, rationale = _parse_judgment(response)

    score = max(guidelines.scale_min, min(guidelines.scale_max, score))
    return DifficultyAssessment(
        set_id=problem_set.set_id,
        score=float(score),
        metric="problem_based",
        rationale=rationale,
    )


def assess_reference_code(
    problem_set: ProblemSet, sandbox: SandboxHandle
) -> DifficultyAssessment:
    """Structural difficulty: summed analyzer counts over all turns."""
    total = 0
    for task in problem_set.tasks:
        if task.reference_code is None:
            raise DifficultyError(
                f"task {task.task_id!r} has no reference code; "
                "reference_code difficulty needs it"
            )
        response = sandbox.request(SandboxRequest(op="analyze", code=task.reference_code))
        if not response.ok or response.counts is None:
            raise DifficultyError(
                f"analyzer failed on task {task.task_id!r}: {response.stderr}"
            )
        total += sum(
            response.counts[k] for k in ("functions", "variables", "conditions", "loops")
        )
    return DifficultyAssessment(
        set_id=problem_set.set_id, score=float(total), metric="reference_code"
    )


def assess_pass_rate(
    corpus: Corpus,
    weak_gateway: ChatGateway,
    sandbox: SandboxHandle,
    repeats: int = 1,
    model_id: str = "weak",
    timeout_s: float = 30.0,
) -> list[DifficultyAssessment]:
    """Difficulty = 1 - weak model's mean pass rate, no memory (K=0).

    Each question is attempted ``repeats`` times; any per-question failure
    counts as an incorrect attempt, never an abort.
    """
    # Imported here: solver/evaluator sit above this module for normal runs.
    from .evaluator import judge
    from .solver import assemble_prompt, bundle_to_request, generate_solution

    if repeats < 1:
        raise DifficultyError("repeats must be >= 1")

    assessments = []
    for problem_set in corpus.problem_sets:
        passes = 0
        attempts = 0
        for _ in range(repeats):
            prior_turns: list[tuple[str, str]] = []
            for task in problem_set.tasks:
                attempts += 1
                bundle = assemble_prompt(task, [], prior_turns=prior_turns)
                try:
                    candidate = generate_solution(
                        bundle_to_request(bundle, model_id=model_id), weak_gateway
                    )
                    exec_response = _execute(
                        sandbox, candidate.code, corpus.root_path, problem_set, task,
                        timeout_s,
                    )
                    verdict = judge(exec_response, task.answer_spec, sandbox=sandbox,
                                    workdir=str(corpus.root_path))
                    if verdict.tag == "Correct":
                        passes += 1
                except Exception:
                    pass  # counted as a failed attempt
                if task.reference_code is not None:
                    prior_turns.append((task.description, task.reference_code))
        assessments.append(
            DifficultyAssessment(
                set_id=problem_set.set_id,
                score=1.0 - passes / attempts,
                metric="pass_rate",
            )
        )
    return assessments


def _execute(sandbox, code, root_path, problem_set, task, timeout_s):
    from .runner import execute_candidate  # shared turn-execution path

    return execute_candidate(
        sandbox=sandbox,
        code=code,
        workdir=str(root_path),
        problem_set=problem_set,
        task=task,
        timeout_s=timeout_s,
        session_id=f"passrate-{problem_set.set_id}",
    )


MANUAL_LEVELS = {"easy": 1.0, "medium": 2.0, "hard": 3.0}


def load_manual(labels_path: Path | str, corpus: Corpus) -> list[DifficultyAssessment]:
    """Load manual difficulty labels.

    The labels file is JSON mapping set_id to ``{"level": "easy"|"medium"|
    "hard", "human_pass_rate": float}``. Score is the level rank;
    secondary key is 1 - human pass rate, so a lower human pass rate ranks
    harder within a level.
    """
    labels = json.loads(Path(labels_path).read_text(encoding="utf-8"))
    assessments = []
    for problem_set in corpus.problem_sets:
        entry = labels.get(problem_set.set_id)
        if entry is None:
            raise DifficultyError(f"labels file has no entry for set {problem_set.set_id!r}")
        level = entry.get("level")
        if level not in MANUAL_LEVELS:
            raise DifficultyError(
                f"set {problem_set.set_id!r}: level must be easy/medium/hard, got {level!r}"
            )
        human_pass_rate = entry.get("human_pass_rate")
        if human_pass_rate is None or not 0.0 <= human_pass_rate <= 1.0:
            raise DifficultyError(
                f"set {problem_set.set_id!r}: human_pass_rate {human_pass_rate!r} "
                "outside [0, 1]"
            )
        assessments.append(
            DifficultyAssessment(
                set_id=problem_set.set_id,
                score=MANUAL_LEVELS[level],
                metric="manual",
                secondary_key=1.0 - human_pass_rate,
            )
        )
    return assessments
