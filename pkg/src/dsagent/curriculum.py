"""Turning difficulty assessments into an ordered task sequence."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .difficulty import DifficultyAssessment

STRATEGIES = ("easy_to_hard", "hard_to_easy", "random")


class CurriculumError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class Curriculum:
    strategy: str
    order: tuple[str, ...]
    seed: int | None = None
    difficulty_metric: str = "unknown"

    def to_record(self) -> dict:
        return {
            "strategy": self.strategy,
            "order": list(self.order),
            "seed": self.seed,
            "difficulty_metric": self.difficulty_metric,
        }


def _check_assessments(assessments: list[DifficultyAssessment]) -> None:
    if not assessments:
        raise CurriculumError("no assessments given")
    ids = [a.set_id for a in assessments]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise CurriculumError(f"duplicate assessments for {dupes}")
    metrics = {a.metric for a in assessments}
    if len(metrics) > 1:
        raise CurriculumError(f"mixed difficulty metrics: {sorted(metrics)}")


def generate(
    assessments: list[DifficultyAssessment],
    strategy: str,
    seed: int | None = None,
) -> Curriculum:
    """Order problem sets by difficulty under ``strategy``.

    ``assessments`` must be given in corpus order: for easy_to_hard the
    sort is stable over (score, secondary_key), so corpus position is the
    final tie-break. hard_to_easy is the exact reversal of that order, and
    random is a seeded Mersenne Twister shuffle (CPython's ``random``).
    """
    if strategy not in STRATEGIES:
        raise CurriculumError(f"unknown strategy {strategy!r}")
    _check_assessments(assessments)
    metric = assessments[0].metric

    if strategy == "random":
        if seed is None:
            raise CurriculumError("random strategy requires a seed")
        order = [a.set_id for a in assessments]
        random.Random(seed).shuffle(order)
        return Curriculum(strategy=strategy, order=tuple(order), seed=seed,
                          difficulty_metric=metric)

    ranked = sorted(assessments, key=lambda a: (a.score, a.secondary_key))
    order = [a.set_id for a in ranked]
    if strategy == "hard_to_easy":
        order.reverse()
    return Curriculum(strategy=strategy, order=tuple(order), seed=None,
                      difficulty_metric=metric)


def verify(curriculum: Curriculum, assessments: list[DifficultyAssessment]) -> bool:
    """True iff the curriculum is a valid ordering of exactly these sets."""
    try:
        _check_assessments(assessments)
    except CurriculumError:
        return False
    expected_ids = sorted(a.set_id for a in assessments)
    if sorted(curriculum.order) != expected_ids:
        return False
    if curriculum.strategy == "random":
        return curriculum.seed is not None
    by_id = {a.set_id: a for a in assessments}
    keys = [(by_id[s].score, by_id[s].secondary_key) for s in curriculum.order]
    if curriculum.strategy == "hard_to_easy":
        keys.reverse()
    return all(keys[i] <= keys[i + 1] for i in range(len(keys) - 1))
