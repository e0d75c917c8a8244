"""Per-agent memory stream with recency / importance / relevance retrieval.

Importance and relevance are integer ratings (1-10) obtained by prompting a
backend. Recency decays geometrically with the ticks since a memory was last
accessed. Each component is min-max normalised over the candidate set and
the final score is their weighted sum.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import prompts
from .backends import TACTICAL, Backend, BackendError, CompletionRequest

logger = logging.getLogger(__name__)

OBSERVATION = "observation"
REFLECTION = "reflection"
PLAN = "plan"
KINDS = (OBSERVATION, REFLECTION, PLAN)

IMPORTANCE_FALLBACK = 5
DEFAULT_DECAY = 0.995
DEFAULT_K = 8


class ScoreParseError(ValueError):
    def __init__(self, raw: str):
        self.raw = raw
        super().__init__(f"no integer score in reply {raw!r}")


@dataclass
class MemoryObject:
    id: int
    owner: str
    kind: str
    description: str
    created_at: int
    last_accessed: int
    importance: int
    sources: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown memory kind {self.kind!r}")
        if not self.description.strip():
            raise ValueError("memory description must be non-empty")
        if not 1 <= self.importance <= 10:
            raise ValueError(f"importance {self.importance} outside 1..10")
        if self.last_accessed < self.created_at:
            raise ValueError("last_accessed precedes created_at")

    def to_json(self) -> str:
        return json.dumps({
            "id": self.id,
            "owner": self.owner,
            "kind": self.kind,
            "created_at": self.created_at,
            "last_accessed": self.last_accessed,
            "importance": self.importance,
            "description": self.description,
            "sources": list(self.sources),
        }, ensure_ascii=False)


@dataclass(frozen=True)
class RetrievalWeights:
    alpha_recency: float = 1.0
    alpha_importance: float = 1.0
    alpha_relevance: float = 1.0
    decay: float = DEFAULT_DECAY
    k: int = DEFAULT_K

    def __post_init__(self) -> None:
        alphas = (self.alpha_recency, self.alpha_importance, self.alpha_relevance)
        if any(a < 0 for a in alphas):
            raise ValueError("retrieval weights must be non-negative")
        if not any(a > 0 for a in alphas):
            raise ValueError("at least one retrieval weight must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        if self.k < 0:
            raise ValueError("k must be non-negative")


@dataclass(frozen=True)
class ScoredMemory:
    memory_id: int
    recency: float
    importance: float
    relevance: float
    norm_recency: float
    norm_importance: float
    norm_relevance: float
    final: float
    memory: MemoryObject = field(compare=False, repr=False)


class MemoryStream:
    """Append-only list of one agent's memories.

    Also tracks the importance accumulated since the last reflection, which
    drives the default reflection trigger.
    """

    def __init__(self, owner: str):
        self.owner = owner
        self.memories: list[MemoryObject] = []
        self.importance_since_reflection = 0
        self.last_reflection_tick: Optional[int] = None
        # (memory id, query) -> relevance; a memory's text never changes, so
        # neither does its score against a fixed query
        self.relevance_memo: dict[tuple[int, str], int] = {}
        self._next_id = 0

    def __len__(self) -> int:
        return len(self.memories)

    def __iter__(self):
        return iter(self.memories)

    def get(self, memory_id: int) -> MemoryObject:
        for m in self.memories:
            if m.id == memory_id:
                return m
        raise KeyError(memory_id)

    def latest(self, n: int) -> list[MemoryObject]:
        return self.memories[-n:] if n > 0 else []

    def append(self, kind: str, description: str, now: int, importance: int, sources: Iterable[int] = ()) -> MemoryObject:
        m = MemoryObject(
            id=self._next_id,
            owner=self.owner,
            kind=kind,
            description=description.strip(),
            created_at=now,
            last_accessed=now,
            importance=importance,
            sources=tuple(sources),
        )
        self.memories.append(m)
        self._next_id += 1
        if kind != REFLECTION:
            self.importance_since_reflection += importance
        return m

    def record(
        self,
        kind: str,
        description: str,
        now: int,
        scorer: Optional[Backend] = None,
        *,
        importance: Optional[int] = None,
        sources: Iterable[int] = (),
    ) -> int:
        """Store a memory and return its id.

        Importance comes from ``scorer`` unless the caller supplies it (as
        reflections do). A failing scorer leaves importance at the fallback.
        """
        if not description or not description.strip():
            raise ValueError("cannot record an empty memory")
        if importance is None:
            if scorer is None:
                raise ValueError("record needs a scorer or an explicit importance")
            try:
                importance = score_importance(description, scorer)
            except (BackendError, ScoreParseError) as exc:
                logger.warning("importance scoring failed for %r, using %d: %s", description[:60], IMPORTANCE_FALLBACK, exc)
                importance = IMPORTANCE_FALLBACK
        return self.append(kind, description, now, clamp_score(importance), sources).id

    def write_log(self, path: str | Path) -> None:
        """One JSON object per line, in id order."""
        with Path(path).open("w", encoding="utf-8") as fh:
            for m in self.memories:
                fh.write(m.to_json() + "\n")

    @classmethod
    def read_log(cls, path: str | Path, owner: Optional[str] = None) -> "MemoryStream":
        stream = None
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                raw = json.loads(line)
                if stream is None:
                    stream = cls(owner or raw["owner"])
                m = MemoryObject(
                    id=raw["id"], owner=raw["owner"], kind=raw["kind"], description=raw["description"],
                    created_at=raw["created_at"], last_accessed=raw["last_accessed"],
                    importance=raw["importance"], sources=tuple(raw.get("sources", ())),
                )
                stream.memories.append(m)
                stream._next_id = max(stream._next_id, m.id + 1)
        return stream if stream is not None else cls(owner or "")


_INT = re.compile(r"-?\d+")


def clamp_score(value: int) -> int:
    return max(1, min(10, int(value)))


def parse_score(reply: str) -> int:
    """First integer in a model reply, clamped to 1..10."""
    m = _INT.search(reply)
    if m is None:
        raise ScoreParseError(reply)
    return clamp_score(int(m.group()))


def score_recency(m: MemoryObject, now: int, decay: float) -> float:
    if now < m.last_accessed:
        raise ValueError(f"now={now} precedes last access {m.last_accessed}")
    return decay ** (now - m.last_accessed)


def score_importance(description: str, scorer: Backend, tier: str = TACTICAL) -> int:
    req = CompletionRequest.user(tier, prompts.render("importance", memory=description), purpose="importance")
    return parse_score(scorer.complete(req))


def score_relevance(m: MemoryObject, query: str, scorer: Backend, tier: str = TACTICAL) -> int:
    text = prompts.render("relevance", memory=m.description, query=query)
    req = CompletionRequest.user(tier, text, purpose="relevance")
    return parse_score(scorer.complete(req))


def min_max(values: Sequence[float]) -> list[float]:
    """Scale to [0, 1]; a constant column maps to 0.5 throughout."""
    if not values:
        return []
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.5] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def score_memories(
    memories: Sequence[MemoryObject],
    query: str,
    weights: RetrievalWeights,
    now: int,
    scorer: Backend,
    memo: Optional[dict[tuple[int, str], int]] = None,
) -> list[ScoredMemory]:
    recency = [score_recency(m, now, weights.decay) for m in memories]
    importance = [float(m.importance) for m in memories]
    relevance = []
    for m in memories:
        if memo is None:
            relevance.append(float(score_relevance(m, query, scorer)))
            continue
        key = (m.id, query)
        if key not in memo:
            memo[key] = score_relevance(m, query, scorer)
        relevance.append(float(memo[key]))
    n_rec, n_imp, n_rel = min_max(recency), min_max(importance), min_max(relevance)
    out = []
    for i, m in enumerate(memories):
        final = (weights.alpha_recency * n_rec[i]
                 + weights.alpha_importance * n_imp[i]
                 + weights.alpha_relevance * n_rel[i])
        out.append(ScoredMemory(m.id, recency[i], importance[i], relevance[i], n_rec[i], n_imp[i], n_rel[i], final, m))
    return out


def retrieve(
    stream: MemoryStream,
    query: str,
    weights: RetrievalWeights,
    now: int,
    scorer: Backend,
) -> list[ScoredMemory]:
    """Top-k memories by final score; ties go to newer, then lower id.

    Returned memories have their ``last_accessed`` set to ``now``.
    """
    if not stream.memories or weights.k == 0:
        return []
    scored = score_memories(stream.memories, query, weights, now, scorer, stream.relevance_memo)
    scored.sort(key=lambda s: (-s.final, -s.memory.created_at, s.memory_id))
    top = scored[: weights.k]
    for s in top:
        s.memory.last_accessed = now
    return top
