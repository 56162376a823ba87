"""Append-only episode memory with exact top-K cosine retrieval.

Each solved (or failed) question becomes one episode; retrieval for the
current question scans every stored episode, which is exact and plenty
fast at benchmark scale (~1300 episodes). The store persists as a
newline-delimited JSON log so a reopened store replays into an identical
in-memory state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gateway import EmbeddingGateway, EmbeddingVector

TAGS = ("Correct", "Incorrect")
PRESENTATION_ORDERS = ("increasing_similarity", "increasing_difficulty")


class MemoryError_(Exception):
    """Store-level failure (corruption, dimension mismatch, bad input)."""


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two vectors; errors on mismatch or zero norm."""
    if a.dimension != b.dimension:
        raise MemoryError_(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    av, bv = a.as_array(), b.as_array()
    norm_a = float(np.linalg.norm(av))
    norm_b = float(np.linalg.norm(bv))
    if norm_a == 0.0 or norm_b == 0.0:
        raise MemoryError_("cosine undefined for zero-norm vector")
    return float(np.dot(av, bv) / (norm_a * norm_b))


@dataclass(frozen=True, slots=True)
class MemoryEpisode:
    sequence_index: int
    problem_description: str
    generated_code: str
    tag: str
    embedding: EmbeddingVector
    difficulty_score: float = 0.0
    set_id: str = ""
    turn_index: int = 0

    def __post_init__(self) -> None:
        if self.sequence_index < 0:
            raise MemoryError_("negative sequence_index")
        if self.tag not in TAGS:
            raise MemoryError_(f"tag must be one of {TAGS}, got {self.tag!r}")


@dataclass(frozen=True, slots=True)
class RetrievalQuery:
    query_text: str
    k: int
    include_incorrect: bool = True
    presentation_order: str = "increasing_similarity"

    def __post_init__(self) -> None:
        if self.k < 0:
            raise MemoryError_("k must be >= 0")
        if self.presentation_order not in PRESENTATION_ORDERS:
            raise MemoryError_(f"unknown presentation order {self.presentation_order!r}")


@dataclass(frozen=True, slots=True)
class RetrievedExample:
    episode: MemoryEpisode
    similarity: float


def _episode_to_record(episode: MemoryEpisode) -> dict:
    return {
        "sequence_index": episode.sequence_index,
        "problem_description": episode.problem_description,
        "generated_code": episode.generated_code,
        "tag": episode.tag,
        "embedding": list(episode.embedding.values),
        "embedding_model": episode.embedding.model_id,
        "difficulty_score": episode.difficulty_score,
        "set_id": episode.set_id,
        "turn_index": episode.turn_index,
    }


def _episode_from_record(record: dict) -> MemoryEpisode:
    return MemoryEpisode(
        sequence_index=record["sequence_index"],
        problem_description=record["problem_description"],
        generated_code=record["generated_code"],
        tag=record["tag"],
        embedding=EmbeddingVector(
            values=tuple(record["embedding"]),
            model_id=record.get("embedding_model", "default"),
        ),
        difficulty_score=record.get("difficulty_score", 0.0),
        set_id=record.get("set_id", ""),
        turn_index=record.get("turn_index", 0),
    )


class EpisodeStore:
    """Append-only memory, one owner per run.

    ``log_path=None`` keeps the store purely in memory (tests, throwaway
    runs); with a path every append is flushed to the log before the call
    returns, and reopening the path replays the log.
    """

    def __init__(self, log_path: Path | str | None = None) -> None:
        self.log_path = Path(log_path) if log_path is not None else None
        self._episodes: list[MemoryEpisode] = []
        self._log_file = None
        if self.log_path is not None:
            if self.log_path.exists():
                self._replay()
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            self._log_file = self.log_path.open("a", encoding="utf-8")

    def _replay(self) -> None:
        for lineno, line in enumerate(
            self.log_path.read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            try:
                episode = _episode_from_record(json.loads(line))
            except (json.JSONDecodeError, KeyError) as exc:
                raise MemoryError_(f"corrupt episode log at line {lineno}: {exc}") from None
            if episode.sequence_index != len(self._episodes):
                raise MemoryError_(
                    f"episode log gap at line {lineno}: expected index "
                    f"{len(self._episodes)}, got {episode.sequence_index}"
                )
            self._episodes.append(episode)

    def __len__(self) -> int:
        return len(self._episodes)

    @property
    def dimension(self) -> int | None:
        return self._episodes[0].embedding.dimension if self._episodes else None

    def append(
        self,
        problem_description: str,
        generated_code: str,
        tag: str,
        embedding: EmbeddingVector,
        difficulty_score: float = 0.0,
        set_id: str = "",
        turn_index: int = 0,
    ) -> MemoryEpisode:
        if self.dimension is not None and embedding.dimension != self.dimension:
            raise MemoryError_(
                f"embedding dimension {embedding.dimension} does not match "
                f"store dimension {self.dimension}"
            )
        episode = MemoryEpisode(
            sequence_index=len(self._episodes),
            problem_description=problem_description,
            generated_code=generated_code,
            tag=tag,
            embedding=embedding,
            difficulty_score=difficulty_score,
            set_id=set_id,
            turn_index=turn_index,
        )
        if self._log_file is not None:
            self._log_file.write(json.dumps(_episode_to_record(episode)) + "\n")
            self._log_file.flush()
        self._episodes.append(episode)
        return episode

    def snapshot(self) -> list[MemoryEpisode]:
        return list(self._episodes)

    def retrieve(self, query: RetrievalQuery, embedder: EmbeddingGateway) -> list[RetrievedExample]:
        """Exact top-K retrieval, then presentation-order sort.

        Selection: highest cosine similarity first, ties to the earlier
        episode. Presentation: ascending similarity, or ascending
        difficulty with similarity as secondary key; sequence index is the
        final deterministic tie-break in both.
        """
        if query.k == 0 or not self._episodes:
            return []
        query_embedding = embedder.embed(query.query_text)
        candidates = [
            ep for ep in self._episodes if query.include_incorrect or ep.tag == "Correct"
        ]
        scored = [
            RetrievedExample(episode=ep, similarity=cosine(query_embedding, ep.embedding))
            for ep in candidates
        ]
        scored.sort(key=lambda r: (-r.similarity, r.episode.sequence_index))
        top = scored[: query.k]
        if query.presentation_order == "increasing_similarity":
            top.sort(key=lambda r: (r.similarity, r.episode.sequence_index))
        else:
            top.sort(
                key=lambda r: (
                    r.episode.difficulty_score,
                    r.similarity,
                    r.episode.sequence_index,
                )
            )
        return top

    def close(self) -> None:
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None

    def __enter__(self) -> "EpisodeStore":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
