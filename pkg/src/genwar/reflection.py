"""Threshold-triggered reflection over a memory stream.

A reflection round asks the backend for salient questions about the latest
memories, retrieves supporting memories for each question, and stores one
insight per question as a ``reflection`` memory that cites its sources.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Callable, Optional

from . import prompts
from .backends import STRATEGIC, TACTICAL, Backend, BackendError, CompletionRequest
from .memory import REFLECTION, MemoryObject, MemoryStream, RetrievalWeights, ScoreParseError, retrieve, score_importance

logger = logging.getLogger(__name__)


class ReflectionError(Exception):
    pass


@dataclass(frozen=True)
class ReflectionConfig:
    threshold: float = 20.0
    window: int = 20
    questions_per_round: int = 2

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise ValueError("reflection threshold must be positive")
        if self.window < 1:
            raise ValueError("reflection window must be at least 1")
        if self.questions_per_round < 1:
            raise ValueError("questions_per_round must be at least 1")


Trigger = Callable[[MemoryStream, ReflectionConfig, int], bool]


def accumulated_importance(stream: MemoryStream, cfg: ReflectionConfig, now: int) -> bool:
    """Fires once the importance added since the last reflection exceeds the threshold."""
    return stream.importance_since_reflection > cfg.threshold


def should_reflect(stream: MemoryStream, cfg: ReflectionConfig, now: int, trigger: Trigger = accumulated_importance) -> bool:
    return trigger(stream, cfg, now)


_NUMBERING = re.compile(r"^\s*(?:[-*•]|\d+[.):])\s*")


def parse_questions(reply: str, limit: int) -> list[str]:
    out = []
    for line in reply.splitlines():
        q = _NUMBERING.sub("", line).strip()
        if q:
            out.append(q)
        if len(out) == limit:
            break
    return out


def _numbered(memories: list[MemoryObject]) -> str:
    return "\n".join(f"{i}. {m.description}" for i, m in enumerate(memories, 1))


def generate_reflection(
    stream: MemoryStream,
    cfg: ReflectionConfig,
    backend: Backend,
    now: int,
    weights: Optional[RetrievalWeights] = None,
    *,
    tier: str = STRATEGIC,
    scorer_tier: str = TACTICAL,
) -> list[MemoryObject]:
    """Run one reflection round and return the stored reflections.

    All backend work happens before anything is stored. On failure the
    stream, including access times touched by retrieval, is left as it was.
    """
    weights = weights or RetrievalWeights()
    touched = {m.id: m.last_accessed for m in stream.memories}
    try:
        recent = stream.latest(cfg.window)
        if not recent:
            return []
        ask = prompts.render(
            "reflection_questions",
            owner=stream.owner,
            memories=_numbered(recent),
            count=cfg.questions_per_round,
        )
        reply = backend.complete(CompletionRequest.user(tier, ask, purpose="reflection_questions"))
        questions = parse_questions(reply, cfg.questions_per_round)

        pending = []
        for question in questions:
            support = [s.memory for s in retrieve(stream, question, weights, now, backend)]
            text = prompts.render(
                "reflection_insight", owner=stream.owner, memories=_numbered(support), question=question,
            )
            insight = backend.complete(CompletionRequest.user(tier, text, purpose="reflection_insight")).strip()
            if not insight:
                logger.warning("empty insight for question %r, skipped", question)
                continue
            insight = insight.splitlines()[0].strip()
            importance = score_importance(insight, backend, tier=scorer_tier)
            pending.append((insight, importance, [m.id for m in support]))
    except (BackendError, ScoreParseError) as exc:
        for m in stream.memories:
            m.last_accessed = touched[m.id]
        raise ReflectionError(f"reflection aborted: {exc}") from exc

    stored = []
    for insight, importance, sources in pending:
        mid = stream.record(REFLECTION, insight, now, importance=importance, sources=sources)
        stored.append(stream.get(mid))
    stream.importance_since_reflection = 0
    stream.last_reflection_tick = now
    return stored


def maybe_reflect(
    stream: MemoryStream,
    cfg: ReflectionConfig,
    backend: Backend,
    now: int,
    weights: Optional[RetrievalWeights] = None,
    trigger: Trigger = accumulated_importance,
) -> list[MemoryObject]:
    if not should_reflect(stream, cfg, now, trigger):
        return []
    return generate_reflection(stream, cfg, backend, now, weights)
