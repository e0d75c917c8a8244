"""Text-completion backends with a strategic and a tactical tier.

Three implementations share the :class:`Backend` interface:

* :class:`ScriptedBackend` answers from an ordered rule table (tests, demos).
* :class:`CachedBackend` replays stored replies and delegates misses upstream.
* :class:`RemoteBackend` speaks the OpenAI-compatible chat-completions protocol.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Pattern, Sequence, Union

import httpx

logger = logging.getLogger(__name__)

STRATEGIC = "strategic"
TACTICAL = "tactical"
TIERS = (STRATEGIC, TACTICAL)
ROLES = ("system", "user", "assistant")

API_KEY_ENV = "GENWAR_API_KEY"
API_BASE_ENV = "GENWAR_API_BASE"
CHAT_PATH = "/v1/chat/completions"


class BackendError(Exception):
    """Any failure to obtain a completion."""


class ScriptMissError(BackendError):
    pass


class NetworkForbiddenError(BackendError):
    pass


class RemoteTimeoutError(BackendError):
    pass


class RemoteStatusError(BackendError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"remote backend returned HTTP {status}: {body[:200]}")


class MalformedReplyError(BackendError):
    pass


@dataclass(frozen=True)
class CompletionRequest:
    tier: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_reply_tokens: int = 512
    # Free-form label ("plan", "importance", ...); not part of the cache key.
    purpose: str = ""

    def __post_init__(self) -> None:
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        roles = [role for role, _ in self.messages]
        if any(r not in ROLES for r in roles):
            raise ValueError(f"unknown message role in {roles}")
        if "user" not in roles:
            raise ValueError("a completion request needs at least one user message")

    @classmethod
    def user(cls, tier: str, text: str, *, system: Optional[str] = None, purpose: str = "", **kw) -> "CompletionRequest":
        messages = []
        if system:
            messages.append(("system", system))
        messages.append(("user", text))
        return cls(tier, tuple(messages), purpose=purpose, **kw)

    @property
    def last_user(self) -> str:
        for role, text in reversed(self.messages):
            if role == "user":
                return text
        raise AssertionError("unreachable: validated in __post_init__")


class Backend:
    """Interface: turn a request into reply text. Implementations are thread-safe."""

    def complete(self, req: CompletionRequest) -> str:
        raise NotImplementedError


Reply = Union[str, Callable[[CompletionRequest], str]]


@dataclass(frozen=True)
class ScriptRule:
    """``match`` is a substring, or a compiled regex searched in the last user message."""

    match: Union[str, Pattern[str]]
    reply: Reply
    tier: Optional[str] = None

    def matches(self, req: CompletionRequest) -> bool:
        if self.tier is not None and self.tier != req.tier:
            return False
        text = req.last_user
        if isinstance(self.match, str):
            return self.match in text
        return self.match.search(text) is not None

    def answer(self, req: CompletionRequest) -> str:
        return self.reply(req) if callable(self.reply) else self.reply


class ScriptedBackend(Backend):
    """First matching rule wins; no match is a hard error."""

    def __init__(self, rules: Sequence[ScriptRule], *, capture: bool = False):
        self.rules = list(rules)
        self.capture = capture
        self.requests: list[CompletionRequest] = []
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest) -> str:
        with self._lock:
            self.calls += 1
            if self.capture:
                self.requests.append(req)
        for rule in self.rules:
            if rule.matches(req):
                return rule.answer(req)
        head = req.last_user.strip().splitlines()[0][:120] if req.last_user.strip() else ""
        raise ScriptMissError(f"no script rule matches {req.tier} prompt starting {head!r}")


class OfflineBackend(Backend):
    """Refuses every call. Stands in for a dead or forbidden upstream."""

    def __init__(self):
        self.calls = 0

    def complete(self, req: CompletionRequest) -> str:
        self.calls += 1
        raise NetworkForbiddenError(f"upstream unavailable for {req.tier} request ({req.purpose or 'unlabelled'})")


class CapturingBackend(Backend):
    """Pass-through wrapper that keeps every (request, reply) pair."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.exchanges: list[tuple[CompletionRequest, str]] = []
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest) -> str:
        reply = self.inner.complete(req)
        with self._lock:
            self.exchanges.append((req, reply))
        return reply

    def prompts(self, purpose: Optional[str] = None) -> list[str]:
        return [r.last_user for r, _ in self.exchanges if purpose is None or r.purpose == purpose]


_WS = re.compile(r"\s+")


def canonical_text(text: str) -> str:
    return _WS.sub(" ", text).strip()


def cache_key(req: CompletionRequest) -> str:
    payload = [req.tier, [[role, canonical_text(text)] for role, text in req.messages], req.temperature]
    blob = json.dumps(payload, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    key: str
    reply: str
    created: float


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    entries: int = 0

    def as_dict(self) -> dict:
        return {"hits": self.hits, "misses": self.misses, "entries": self.entries}


class CachedBackend(Backend):
    """Replay cache in front of another backend, persisted as append-only JSON lines."""

    def __init__(self, upstream: Backend, path: Optional[str | Path] = None):
        self.upstream = upstream
        self.path = Path(path) if path is not None else None
        self.entries: dict[str, CacheEntry] = {}
        self.stats = CacheStats()
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                    entry = CacheEntry(raw["key"], raw["reply"], float(raw.get("created", 0.0)))
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    logger.warning("skipping corrupt cache line %s:%d (%s)", self.path, lineno, exc)
                    continue
                # first write wins, so a key never changes its reply
                self.entries.setdefault(entry.key, entry)
        self.stats.entries = len(self.entries)

    def complete(self, req: CompletionRequest) -> str:
        key = cache_key(req)
        with self._lock:
            hit = self.entries.get(key)
            if hit is not None:
                self.stats.hits += 1
                return hit.reply
            self.stats.misses += 1
        reply = self.upstream.complete(req)
        with self._lock:
            existing = self.entries.get(key)
            if existing is not None:
                return existing.reply
            entry = CacheEntry(key, reply, time.time())
            self.entries[key] = entry
            self.stats.entries = len(self.entries)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"key": key, "reply": reply, "created": entry.created}, ensure_ascii=False) + "\n")
        return reply


@dataclass
class RemoteBackend(Backend):
    """OpenAI-compatible chat-completions client.

    ``models`` maps each tier to a model name, so the strong/cheap split is
    configuration. Transient failures (timeouts, 429, 5xx) are retried with
    exponential backoff.
    """

    base_url: str
    api_key: str
    models: dict[str, str] = field(default_factory=lambda: {STRATEGIC: "gpt-4", TACTICAL: "gpt-3.5-turbo"})
    timeout: float = 60.0
    max_attempts: int = 4
    backoff: float = 1.0
    transport: Optional[httpx.BaseTransport] = None
    sleep: Callable[[float], None] = time.sleep

    @classmethod
    def from_env(cls, models: Optional[dict[str, str]] = None, **kw) -> "RemoteBackend":
        base = os.environ.get(API_BASE_ENV, "").strip()
        key = os.environ.get(API_KEY_ENV, "").strip()
        if not base:
            raise BackendError(f"{API_BASE_ENV} is not set")
        if not key:
            raise BackendError(f"{API_KEY_ENV} is not set")
        if models is not None:
            kw["models"] = models
        return cls(base_url=base, api_key=key, **kw)

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + CHAT_PATH

    def payload(self, req: CompletionRequest) -> dict:
        return {
            "model": self.models[req.tier],
            "messages": [{"role": role, "content": text} for role, text in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_reply_tokens,
        }

    def _post(self, body: dict) -> httpx.Response:
        headers = {"Authorization": f"Bearer {self.api_key}"}
        with httpx.Client(timeout=self.timeout, transport=self.transport) as client:
            return client.post(self.url, json=body, headers=headers)

    def complete(self, req: CompletionRequest) -> str:
        body = self.payload(req)
        last: Optional[BackendError] = None
        for attempt in range(self.max_attempts):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._post(body)
            except httpx.TimeoutException as exc:
                last = RemoteTimeoutError(f"request timed out after {self.timeout}s: {exc}")
                logger.warning("attempt %d/%d: %s", attempt + 1, self.max_attempts, last)
                continue
            except httpx.TransportError as exc:
                last = BackendError(f"transport failure: {exc}")
                logger.warning("attempt %d/%d: %s", attempt + 1, self.max_attempts, last)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = RemoteStatusError(resp.status_code, resp.text)
                logger.warning("attempt %d/%d: %s", attempt + 1, self.max_attempts, last)
                continue
            if resp.status_code >= 400:
                raise RemoteStatusError(resp.status_code, resp.text)
            return self._reply_text(resp)
        assert last is not None
        raise last

    @staticmethod
    def _reply_text(resp: httpx.Response) -> str:
        try:
            data = resp.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedReplyError(f"unexpected reply body: {resp.text[:200]!r}") from exc
        if not isinstance(content, str):
            raise MalformedReplyError(f"reply content is not text: {content!r}")
        return content
