"""Task corpus loading and validation.

A corpus lives in a directory with a ``manifest.json`` at its root. The
manifest fixes the ordering of problem sets and of the turns inside each
set; that ordering is load-bearing for downstream tie-breaking, so nothing
here ever sorts or deduplicates silently.

Manifest schema (JSON, UTF-8)::

    {
      "problem_sets": [
        {
          "set_id": "<unique id>",
          "source": "leetcode-like",
          "tasks": [
            {
              "task_id": "<unique id>",
              "description_file": "relative/path.md",
              "data_files": ["relative/data.csv", ...],
              "answer": {"kind": "numerical", "expected": "3.14",
                         "tolerance": 0.01},
              "reference_code_file": "relative/ref.py",   # optional
              "category": "statistical"                   # optional
            },
            ...
          ]
        },
        ...
      ]
    }

``answer.kind`` is one of ``numerical``, ``multiple_choice``,
``value_literal``, ``checker_script``. For ``checker_script`` the
``expected`` payload is the checker's path relative to the corpus root.
Descriptions are kept verbatim, byte for byte; prompts and embeddings
must see exactly what the description file contains.
"""

from __future__ import annotations

import json
import math
import shutil
from dataclasses import dataclass, field
from pathlib import Path

MANIFEST_NAME = "manifest.json"

ANSWER_KINDS = ("numerical", "multiple_choice", "value_literal", "checker_script")


class CorpusError(Exception):
    """Raised when a corpus fails to load or validate."""


@dataclass(frozen=True, slots=True)
class GroundTruth:
    kind: str
    expected: str
    tolerance: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ANSWER_KINDS:
            raise CorpusError(f"unknown answer kind {self.kind!r}")
        if self.kind == "numerical":
            try:
                value = float(self.expected)
            except ValueError:
                raise CorpusError(
                    f"numerical answer {self.expected!r} does not parse as a number"
                ) from None
            if not math.isfinite(value):
                raise CorpusError(f"numerical answer {self.expected!r} is not finite")
            if self.tolerance is not None and self.tolerance < 0:
                raise CorpusError(f"negative tolerance {self.tolerance}")
        if self.kind == "multiple_choice":
            label = self.expected.strip()
            if not label or len(label.split()) != 1:
                raise CorpusError(
                    f"multiple_choice answer must be a single option label, got {self.expected!r}"
                )


@dataclass(frozen=True, slots=True)
class Task:
    task_id: str
    description: str
    data_files: tuple[str, ...]
    answer_spec: GroundTruth
    turn_index: int = 0
    reference_code: str | None = None
    category: str | None = None

    def __post_init__(self) -> None:
        if not self.description:
            raise CorpusError(f"task {self.task_id!r} has an empty description")
        if self.turn_index < 0:
            raise CorpusError(f"task {self.task_id!r} has negative turn_index")


@dataclass(frozen=True, slots=True)
class ProblemSet:
    set_id: str
    tasks: tuple[Task, ...]
    source_dataset: str = "unknown"

    def __post_init__(self) -> None:
        if not self.tasks:
            raise CorpusError(f"problem set {self.set_id!r} has no tasks")
        for i, task in enumerate(self.tasks):
            if task.turn_index != i:
                raise CorpusError(
                    f"problem set {self.set_id!r}: task {task.task_id!r} has "
                    f"turn_index {task.turn_index}, expected {i}"
                )

    @property
    def is_multi_turn(self) -> bool:
        return len(self.tasks) > 1


@dataclass(frozen=True, slots=True)
class Corpus:
    root_path: Path
    problem_sets: tuple[ProblemSet, ...] = field(default=())

    @property
    def question_count(self) -> int:
        return sum(len(ps.tasks) for ps in self.problem_sets)

    def set_ids(self) -> list[str]:
        return [ps.set_id for ps in self.problem_sets]

    def get_set(self, set_id: str) -> ProblemSet:
        for ps in self.problem_sets:
            if ps.set_id == set_id:
                return ps
        raise KeyError(set_id)

    def iter_tasks(self):
        for ps in self.problem_sets:
            for task in ps.tasks:
                yield ps, task


def question_count(corpus: Corpus) -> int:
    return corpus.question_count


def _resolve_under_root(root: Path, relative: str, context: str) -> Path:
    path = (root / relative).resolve()
    try:
        path.relative_to(root.resolve())
    except ValueError:
        raise CorpusError(f"{context}: path {relative!r} escapes the corpus root") from None
    return path


def _load_task(root: Path, entry: dict, turn_index: int, set_id: str) -> Task:
    context = f"set {set_id!r}, task {entry.get('task_id')!r}"
    try:
        task_id = entry["task_id"]
        description_file = entry["description_file"]
        answer = entry["answer"]
    except KeyError as exc:
        raise CorpusError(f"{context}: missing manifest field {exc}") from None

    desc_path = _resolve_under_root(root, description_file, context)
    if not desc_path.is_file():
        raise CorpusError(f"{context}: description file {description_file!r} not found")
    description = desc_path.read_text(encoding="utf-8")

    data_files = tuple(entry.get("data_files", ()))
    for rel in data_files:
        data_path = _resolve_under_root(root, rel, context)
        if not data_path.is_file():
            raise CorpusError(f"{context}: data file {rel!r} not found")

    reference_code = None
    ref_file = entry.get("reference_code_file")
    if ref_file is not None:
        ref_path = _resolve_under_root(root, ref_file, context)
        if not ref_path.is_file():
            raise CorpusError(f"{context}: reference code file {ref_file!r} not found")
        reference_code = ref_path.read_text(encoding="utf-8")

    try:
        truth = GroundTruth(
            kind=answer["kind"],
            expected=answer["expected"],
            tolerance=answer.get("tolerance"),
        )
    except CorpusError as exc:
        raise CorpusError(f"{context}: {exc}") from None

    return Task(
        task_id=task_id,
        description=description,
        data_files=data_files,
        answer_spec=truth,
        turn_index=turn_index,
        reference_code=reference_code,
        category=entry.get("category"),
    )


def load_corpus(root: Path | str) -> Corpus:
    """Load and validate a corpus from ``root``.

    Problem sets come back in manifest order. Raises :class:`CorpusError`
    naming the offending entry on any validation failure.
    """
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise CorpusError(f"no {MANIFEST_NAME} under {root}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed manifest: {exc}") from None

    seen_sets: set[str] = set()
    seen_tasks: set[str] = set()
    problem_sets: list[ProblemSet] = []
    for set_entry in manifest.get("problem_sets", ()):
        set_id = set_entry.get("set_id")
        if not set_id:
            raise CorpusError("problem set entry without set_id")
        if set_id in seen_sets:
            raise CorpusError(f"duplicate set_id {set_id!r}")
        seen_sets.add(set_id)

        tasks = []
        for i, task_entry in enumerate(set_entry.get("tasks", ())):
            task = _load_task(root, task_entry, i, set_id)
            if task.task_id in seen_tasks:
                raise CorpusError(f"duplicate task_id {task.task_id!r}")
            seen_tasks.add(task.task_id)
            tasks.append(task)
        problem_sets.append(
            ProblemSet(
                set_id=set_id,
                tasks=tuple(tasks),
                source_dataset=set_entry.get("source", "unknown"),
            )
        )
    return Corpus(root_path=root, problem_sets=tuple(problem_sets))


def write_corpus(corpus: Corpus, dest_root: Path | str) -> Path:
    """Serialize ``corpus`` into a fresh directory (manifest + files).

    Used for round-trip checks and fixture generation; data files are
    copied byte for byte from the source root.
    """
    dest_root = Path(dest_root)
    dest_root.mkdir(parents=True, exist_ok=True)
    entries = []
    for ps in corpus.problem_sets:
        set_dir = dest_root / ps.set_id
        set_dir.mkdir(exist_ok=True)
        task_entries = []
        for task in ps.tasks:
            desc_rel = f"{ps.set_id}/{task.task_id}.desc.md"
            (dest_root / desc_rel).write_text(task.description, encoding="utf-8")
            entry: dict = {
                "task_id": task.task_id,
                "description_file": desc_rel,
                "data_files": list(task.data_files),
                "answer": {
                    "kind": task.answer_spec.kind,
                    "expected": task.answer_spec.expected,
                },
            }
            if task.answer_spec.tolerance is not None:
                entry["answer"]["tolerance"] = task.answer_spec.tolerance
            for rel in task.data_files:
                dest = dest_root / rel
                dest.parent.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(corpus.root_path / rel, dest)
            if task.reference_code is not None:
                ref_rel = f"{ps.set_id}/{task.task_id}.ref.py"
                (dest_root / ref_rel).write_text(task.reference_code, encoding="utf-8")
                entry["reference_code_file"] = ref_rel
            if task.category is not None:
                entry["category"] = task.category
            task_entries.append(entry)
        entries.append(
            {"set_id": ps.set_id, "source": ps.source_dataset, "tasks": task_entries}
        )
    manifest_path = dest_root / MANIFEST_NAME
    manifest_path.write_text(
        json.dumps({"problem_sets": entries}, indent=2), encoding="utf-8"
    )
    return manifest_path
