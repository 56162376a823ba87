"""End-to-end campaign driver.

A run is: assess difficulty -> generate curriculum -> walk the corpus in
curriculum order, and for every question retrieve from memory, assemble
the prompt, generate code, execute, judge, and append the episode. Each
repeat starts from an empty memory. ``sweep`` runs the Cartesian product
of ablation axes, reusing difficulty assessments across cells.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from scipy import stats

from . import curriculum as curriculum_mod
from .corpus import Corpus, ProblemSet, Task, load_corpus
from .difficulty import (
    DifficultyAssessment,
    DifficultyGuidelines,
    assess_pass_rate,
    assess_problem_based,
    assess_reference_code,
    load_manual,
)
from .evaluator import QuestionMeta, Verdict, judge, pass_rate
from .gateway import ChatGateway, EmbeddingGateway, GatewayError
from .memory import EpisodeStore, RetrievalQuery
from .sandbox import SandboxHandle, SandboxRequest, SandboxResponse
from .solver import SolverError, assemble_prompt, bundle_to_request, generate_solution


class RunError(Exception):
    """Configuration-level failure; raised before any model call."""


@dataclass(slots=True)
class RunConfig:
    corpus_path: str
    difficulty_metric: str = "problem_based"
    strategy: str = "easy_to_hard"
    seed: int = 0
    k: int = 5
    presentation_order: str = "increasing_similarity"
    include_incorrect: bool = True
    repeats: int | None = None  # None: 3 for ordered strategies, 5 for random
    mentor_model_id: str = "default"
    student_model_id: str = "default"
    embed_model_id: str = "default"
    weak_model_id: str = "weak"
    temperature: float = 0.0
    timeout_s: float = 30.0
    passrate_repeats: int = 1
    manual_labels_path: str | None = None
    query_includes_first_turn: bool = True
    output_dir: str | None = None

    def __post_init__(self) -> None:
        if self.k < 0:
            raise RunError("k must be >= 0")
        if self.repeats is not None and self.repeats < 1:
            raise RunError("repeats must be >= 1")
        if not 0.0 <= self.temperature <= 1.0:
            raise RunError("temperature must be in [0, 1]")

    @property
    def effective_repeats(self) -> int:
        if self.repeats is not None:
            return self.repeats
        return 5 if self.strategy == "random" else 3

    def to_record(self) -> dict:
        return {
            "corpus_path": self.corpus_path,
            "difficulty_metric": self.difficulty_metric,
            "strategy": self.strategy,
            "seed": self.seed,
            "k": self.k,
            "presentation_order": self.presentation_order,
            "include_incorrect": self.include_incorrect,
            "repeats": self.effective_repeats,
            "mentor_model_id": self.mentor_model_id,
            "student_model_id": self.student_model_id,
            "embed_model_id": self.embed_model_id,
            "temperature": self.temperature,
            "timeout_s": self.timeout_s,
            "query_includes_first_turn": self.query_includes_first_turn,
        }


@dataclass(slots=True)
class QuestionRecord:
    set_id: str
    task_id: str
    turn_index: int
    prompt_sha256: str
    code: str
    extraction_note: str
    verdict: Verdict
    retrieved: list[dict]  # {"sequence_index": int, "similarity": float}
    memory_size_before: int

    def to_record(self) -> dict:
        return {
            "set_id": self.set_id,
            "task_id": self.task_id,
            "turn_index": self.turn_index,
            "prompt_sha256": self.prompt_sha256,
            "code": self.code,
            "extraction_note": self.extraction_note,
            "verdict": self.verdict.to_record(),
            "retrieved": self.retrieved,
            "memory_size_before": self.memory_size_before,
        }


@dataclass(slots=True)
class RunReport:
    config: dict
    assessments: list[dict]
    curricula: list[dict]  # one per repeat
    repeats: list[dict]  # {"records": [...], "pass_report": {...}}
    mean_pass_rate: float
    call_counts: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0  # kept out of the serialized report for determinism

    def to_record(self) -> dict:
        return {
            "config": self.config,
            "assessments": self.assessments,
            "curricula": self.curricula,
            "repeats": self.repeats,
            "mean_pass_rate": self.mean_pass_rate,
            "call_counts": self.call_counts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, indent=2) + "\n"


class _CountingChat:
    def __init__(self, inner: ChatGateway, counts: dict) -> None:
        self.inner, self.counts = inner, counts

    def complete(self, request):
        self.counts["chat_calls"] = self.counts.get("chat_calls", 0) + 1
        return self.inner.complete(request)


class _CountingEmbed:
    def __init__(self, inner: EmbeddingGateway, counts: dict) -> None:
        self.inner, self.counts = inner, counts

    def embed(self, text):
        self.counts["embed_calls"] = self.counts.get("embed_calls", 0) + 1
        return self.inner.embed(text)


def execute_candidate(
    sandbox: SandboxHandle,
    code: str,
    workdir: str,
    problem_set: ProblemSet,
    task: Task,
    timeout_s: float,
    session_id: str,
) -> SandboxResponse:
    """Execute one candidate program.

    Single-turn sets get a plain exec. Multi-turn sets get a fresh session
    seeded with the reference solutions of all preceding turns, so a wrong
    earlier answer never propagates into this turn's state.
    """
    if len(problem_set.tasks) == 1:
        return sandbox.request(
            SandboxRequest(op="exec", code=code, workdir=workdir, timeout_s=timeout_s)
        )
    sandbox.request(
        SandboxRequest(op="reset", workdir=workdir, session_id=session_id)
    )
    for prior in problem_set.tasks[: task.turn_index]:
        if prior.reference_code:
            sandbox.request(
                SandboxRequest(
                    op="exec_session",
                    code=prior.reference_code,
                    workdir=workdir,
                    timeout_s=timeout_s,
                    session_id=session_id,
                )
            )
    return sandbox.request(
        SandboxRequest(
            op="exec_session",
            code=code,
            workdir=workdir,
            timeout_s=timeout_s,
            session_id=session_id,
        )
    )


def assess_corpus(
    corpus: Corpus,
    config: RunConfig,
    mentor_gateway: ChatGateway | None = None,
    weak_gateway: ChatGateway | None = None,
    sandbox: SandboxHandle | None = None,
) -> list[DifficultyAssessment]:
    """Produce one assessment per problem set under the configured metric,
    returned in corpus order."""
    metric = config.difficulty_metric
    if metric == "problem_based":
        if mentor_gateway is None:
            raise RunError("problem_based difficulty needs a mentor gateway")
        guidelines = DifficultyGuidelines.default()
        return [
            assess_problem_based(ps, guidelines, mentor_gateway,
                                 model_id=config.mentor_model_id)
            for ps in corpus.problem_sets
        ]
    if metric == "reference_code":
        if sandbox is None:
            raise RunError("reference_code difficulty needs a sandbox")
        return [assess_reference_code(ps, sandbox) for ps in corpus.problem_sets]
    if metric == "pass_rate":
        if weak_gateway is None or sandbox is None:
            raise RunError("pass_rate difficulty needs a weak-model gateway and a sandbox")
        return assess_pass_rate(
            corpus, weak_gateway, sandbox,
            repeats=config.passrate_repeats, model_id=config.weak_model_id,
            timeout_s=config.timeout_s,
        )
    if metric == "manual":
        if config.manual_labels_path is None:
            raise RunError("manual difficulty needs manual_labels_path")
        return load_manual(config.manual_labels_path, corpus)
    raise RunError(f"unknown difficulty metric {metric!r}")


def _solve_one(
    corpus: Corpus,
    problem_set: ProblemSet,
    task: Task,
    score: float,
    store: EpisodeStore,
    config: RunConfig,
    student: ChatGateway,
    embedder: EmbeddingGateway,
    sandbox: SandboxHandle,
    session_id: str,
) -> QuestionRecord:
    if config.query_includes_first_turn and task.turn_index > 0:
        query_text = problem_set.tasks[0].description + "\n\n" + task.description
    else:
        query_text = task.description

    memory_size_before = len(store)
    retrieved = []
    if config.k > 0:
        retrieved = store.retrieve(
            RetrievalQuery(
                query_text=query_text,
                k=config.k,
                include_incorrect=config.include_incorrect,
                presentation_order=config.presentation_order,
            ),
            embedder,
        )

    prior_turns = [
        (prior.description, prior.reference_code or "")
        for prior in problem_set.tasks[: task.turn_index]
    ]
    bundle = assemble_prompt(task, retrieved, prior_turns=prior_turns)
    request = bundle_to_request(
        bundle, model_id=config.student_model_id, temperature=config.temperature
    )

    code = ""
    extraction_note = "whole_response"
    try:
        candidate = generate_solution(request, student)
        code = candidate.code
        extraction_note = candidate.extraction_note
    except (GatewayError, SolverError) as exc:
        verdict = Verdict(
            tag="Incorrect", cause="extraction_empty", detail=f"generation failed: {exc}"
        )
    else:
        execution = execute_candidate(
            sandbox, code, str(corpus.root_path), problem_set, task,
            config.timeout_s, session_id,
        )
        verdict = judge(execution, task.answer_spec, sandbox=sandbox,
                        workdir=str(corpus.root_path))

    store.append(
        problem_description=query_text,
        generated_code=code,
        tag=verdict.tag,
        embedding=embedder.embed(query_text),
        difficulty_score=score,
        set_id=problem_set.set_id,
        turn_index=task.turn_index,
    )

    return QuestionRecord(
        set_id=problem_set.set_id,
        task_id=task.task_id,
        turn_index=task.turn_index,
        prompt_sha256=request.payload_hash(),
        code=code,
        extraction_note=extraction_note,
        verdict=verdict,
        retrieved=[
            {"sequence_index": r.episode.sequence_index, "similarity": r.similarity}
            for r in retrieved
        ],
        memory_size_before=memory_size_before,
    )


def run(
    config: RunConfig,
    student_gateway: ChatGateway,
    embedder: EmbeddingGateway,
    sandbox: SandboxHandle,
    mentor_gateway: ChatGateway | None = None,
    weak_gateway: ChatGateway | None = None,
    corpus: Corpus | None = None,
    assessments: list[DifficultyAssessment] | None = None,
) -> RunReport:
    """Execute a full two-stage campaign and (optionally) write reports.

    ``assessments`` may be supplied to reuse stage-1 output across sweep
    cells; they must cover the corpus and be in corpus order.
    """
    started = time.monotonic()
    if corpus is None:
        corpus = load_corpus(config.corpus_path)
    if corpus.question_count == 0:
        raise RunError("corpus has no questions")

    counts: dict[str, int] = {}
    student = _CountingChat(student_gateway, counts)
    counting_embedder = _CountingEmbed(embedder, counts)
    mentor = _CountingChat(mentor_gateway, counts) if mentor_gateway else None

    if assessments is None:
        assessments = assess_corpus(
            corpus, config, mentor_gateway=mentor, weak_gateway=weak_gateway,
            sandbox=sandbox,
        )
    if [a.set_id for a in assessments] != corpus.set_ids():
        raise RunError("assessments do not match the corpus (ids or order)")
    score_by_set = {a.set_id: a.score for a in assessments}

    output_dir = Path(config.output_dir) if config.output_dir else None
    if output_dir is not None:
        output_dir.mkdir(parents=True, exist_ok=True)
        (output_dir / "config.json").write_text(
            json.dumps(config.to_record(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )

    curricula = []
    repeat_reports = []
    pass_rates = []
    for r in range(config.effective_repeats):
        seed = config.seed + r if config.strategy == "random" else config.seed
        cur = curriculum_mod.generate(assessments, config.strategy, seed=seed)
        if not curriculum_mod.verify(cur, assessments):
            raise RunError("generated curriculum failed verification")
        curricula.append(cur.to_record())

        log_path = output_dir / f"memory_rep{r}.jsonl" if output_dir else None
        if log_path is not None and log_path.exists():
            log_path.unlink()  # repeats always start from an empty memory
        store = EpisodeStore(log_path)
        records: list[QuestionRecord] = []
        metas: list[QuestionMeta] = []
        for set_id in cur.order:
            problem_set = corpus.get_set(set_id)
            session_id = f"rep{r}-{set_id}"
            for task in problem_set.tasks:
                record = _solve_one(
                    corpus, problem_set, task, score_by_set[set_id], store,
                    config, student, counting_embedder, sandbox, session_id,
                )
                records.append(record)
                metas.append(
                    QuestionMeta(
                        set_id=set_id,
                        task_id=task.task_id,
                        answer_kind=task.answer_spec.kind,
                        category=task.category,
                    )
                )
        store.close()
        report = pass_rate([(rec.verdict, meta) for rec, meta in zip(records, metas)])
        pass_rates.append(report.overall)
        repeat_reports.append(
            {
                "records": [rec.to_record() for rec in records],
                "pass_report": report.to_record(),
            }
        )

    run_report = RunReport(
        config=config.to_record(),
        assessments=[a.to_record() for a in assessments],
        curricula=curricula,
        repeats=repeat_reports,
        mean_pass_rate=sum(pass_rates) / len(pass_rates),
        call_counts=dict(sorted(counts.items())),
        wall_clock_s=time.monotonic() - started,
    )
    if output_dir is not None:
        write_report(run_report, output_dir)
    return run_report


def write_report(report: RunReport, output_dir: Path | str) -> Path:
    """Write report files; report.json lands via an atomic rename, so its
    presence marks a completed run."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / "curriculum.json").write_text(
        json.dumps(report.curricula, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    with (output_dir / "records.jsonl").open("w", encoding="utf-8") as fh:
        for i, repeat in enumerate(report.repeats):
            for record in repeat["records"]:
                fh.write(json.dumps({"repeat": i, **record}, sort_keys=True) + "\n")
    (output_dir / "summary.txt").write_text(format_summary(report), encoding="utf-8")
    (output_dir / "timing.json").write_text(
        json.dumps({"wall_clock_s": report.wall_clock_s}) + "\n", encoding="utf-8"
    )
    tmp = output_dir / ".report.json.tmp"
    tmp.write_text(report.to_json(), encoding="utf-8")
    final = output_dir / "report.json"
    tmp.replace(final)
    return final


def format_summary(report: RunReport) -> str:
    lines = [
        f"strategy={report.config['strategy']} metric={report.config['difficulty_metric']} "
        f"K={report.config['k']} order={report.config['presentation_order']} "
        f"include_incorrect={report.config['include_incorrect']}",
        f"repeats={len(report.repeats)} mean_pass_rate={report.mean_pass_rate:.3f}",
    ]
    for i, repeat in enumerate(report.repeats):
        pr = repeat["pass_report"]
        lines.append(f"  repeat {i}: overall={pr['overall']:.3f} counts={pr['counts']['overall']}")
    return "\n".join(lines) + "\n"


SWEEP_AXES = ("strategy", "k", "presentation_order", "include_incorrect", "difficulty_metric")


def sweep(
    base_config: RunConfig,
    axes: dict[str, list],
    student_gateway: ChatGateway,
    embedder: EmbeddingGateway,
    sandbox: SandboxHandle,
    mentor_gateway: ChatGateway | None = None,
    weak_gateway: ChatGateway | None = None,
) -> tuple[list[RunReport | None], str]:
    """Run the Cartesian product of ablation cells.

    Difficulty assessments are computed once per metric and shared across
    cells (stage 1 is independent of stage 2 settings). A cell that aborts
    is reported as a failed row; the other cells still run.
    """
    for name, values in axes.items():
        if name not in SWEEP_AXES:
            raise RunError(f"unknown sweep axis {name!r}")
        if not values:
            raise RunError(f"sweep axis {name!r} is empty")
    names = [name for name in SWEEP_AXES if name in axes]
    value_lists = [axes[name] for name in names]

    corpus = load_corpus(base_config.corpus_path)
    assessment_cache: dict[str, list[DifficultyAssessment]] = {}

    reports: list[RunReport | None] = []
    rows = []
    for combo in itertools.product(*value_lists):
        overrides = dict(zip(names, combo))
        cell_config = replace(base_config, **overrides)
        if base_config.output_dir:
            cell_name = "_".join(f"{k}={v}" for k, v in overrides.items()) or "base"
            cell_config.output_dir = str(Path(base_config.output_dir) / cell_name)
        try:
            metric = cell_config.difficulty_metric
            if metric not in assessment_cache:
                assessment_cache[metric] = assess_corpus(
                    corpus, cell_config, mentor_gateway=mentor_gateway,
                    weak_gateway=weak_gateway, sandbox=sandbox,
                )
            report = run(
                cell_config, student_gateway, embedder, sandbox,
                mentor_gateway=mentor_gateway, weak_gateway=weak_gateway,
                corpus=corpus, assessments=assessment_cache[metric],
            )
            reports.append(report)
            rows.append((overrides, f"{report.mean_pass_rate:.3f}"))
        except Exception as exc:  # cell isolation: one bad cell never kills the sweep
            reports.append(None)
            rows.append((overrides, f"FAILED: {exc}"))

    header = names + ["mean_pass_rate"]
    table_rows = [[str(overrides[name]) for name in names] + [result]
                  for overrides, result in rows]
    widths = [max(len(header[i]), *(len(row[i]) for row in table_rows)) if table_rows
              else len(header[i]) for i in range(len(header))]

    def fmt(cells):
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(cells))

    table = "\n".join([fmt(header), fmt(["-" * w for w in widths])] +
                      [fmt(row) for row in table_rows]) + "\n"
    return reports, table


def correlate_difficulty(
    assessments_a: list[DifficultyAssessment],
    assessments_b: list[DifficultyAssessment],
) -> float:
    """Spearman rank correlation between two difficulty metrics' scores
    (average ranks on ties)."""
    ids_a = {a.set_id for a in assessments_a}
    ids_b = {b.set_id for b in assessments_b}
    if ids_a != ids_b:
        raise RunError(
            f"assessment coverage differs: {sorted(ids_a ^ ids_b)}"
        )
    by_id_b = {b.set_id: b.score for b in assessments_b}
    xs = [a.score for a in assessments_a]
    ys = [by_id_b[a.set_id] for a in assessments_a]
    return float(stats.spearmanr(xs, ys).statistic)
