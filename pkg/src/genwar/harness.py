"""Experiment runner: wire controllers to the simulator, run seeded batches, score them.

Red and blue each get a controller: ``gwa`` (memory, reflection and
negotiated planning), ``gwae`` (the same plus an expert document in every
planning prompt), ``rule`` or ``random``. Episode ``i`` of a batch uses seed
``base + i``.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .backends import (
    STRATEGIC,
    TACTICAL,
    Backend,
    CachedBackend,
    CompletionRequest,
    OfflineBackend,
    RemoteBackend,
)
from .baselines import RandomPolicy, rule_policy
from .memory import OBSERVATION, PLAN, MemoryStream, RetrievalWeights, retrieve
from .planning import DEFAULT_MAX_ROUNDS, assignment_to_action, negotiate, strategic_observations, symbol_for_intent
from .reflection import ReflectionConfig, maybe_reflect
from .scenario import DEFAULT_SCENARIO, Scenario, load_scenario
from .scripted import scripted_backend
from .sim import BLUE, RED, SIDES, Action, GameState, opponent, side_view, step

logger = logging.getLogger(__name__)

GWA = "gwa"
GWAE = "gwae"
RULE = "rule"
RANDOM = "random"
POLICIES = (GWA, GWAE, RULE, RANDOM)
PROFILES = ("scripted", "cached", "remote")
UPSTREAMS = ("remote", "scripted", "offline")

KILL_POINTS = 100
HOLD_POINTS = 50
CAPTURE_BONUS = 5000
SURVIVOR_POINTS = 1000

CSV_COLUMNS = ("episode", "seed", "winner", "ticks", "kill_score", "goal_score", "survive_score", "trajectory_hash")


class ConfigError(ValueError):
    pass


class EpisodeError(RuntimeError):
    def __init__(self, message: str, events: list[dict]):
        self.events = events
        super().__init__(message)


def load_expert_doc(path: str | Path | None) -> str:
    if path is None:
        raise ConfigError("an expert document path is required")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read expert document {p}: {exc}") from exc
    text = text.strip()
    if not text:
        raise ConfigError(f"expert document {p} is empty")
    return text


@dataclass
class ExperimentConfig:
    scenario: str = DEFAULT_SCENARIO
    red: str = GWA
    blue: str = RULE
    episodes: int = 10
    seed: int = 0
    weights: RetrievalWeights = field(default_factory=RetrievalWeights)
    reflection: ReflectionConfig = field(default_factory=ReflectionConfig)
    max_rounds: int = DEFAULT_MAX_ROUNDS
    backend: str = "scripted"
    expert_doc: Optional[str] = None
    out: Optional[str] = None
    cache_file: Optional[str] = None
    upstream: str = "remote"
    strategic_model: str = "gpt-4"
    tactical_model: str = "gpt-3.5-turbo"
    workers: int = 1

    def validate(self) -> None:
        for side, policy in ((RED, self.red), (BLUE, self.blue)):
            if policy not in POLICIES:
                raise ConfigError(f"{side} policy {policy!r} is not one of {', '.join(POLICIES)}")
        if self.backend not in PROFILES:
            raise ConfigError(f"backend profile {self.backend!r} is not one of {', '.join(PROFILES)}")
        if self.upstream not in UPSTREAMS:
            raise ConfigError(f"upstream {self.upstream!r} is not one of {', '.join(UPSTREAMS)}")
        if self.episodes < 0:
            raise ConfigError("episodes must be non-negative")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if GWAE in (self.red, self.blue):
            load_expert_doc(self.expert_doc)

    @property
    def uses_llm(self) -> bool:
        return self.red in (GWA, GWAE) or self.blue in (GWA, GWAE)

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["weights"] = dataclasses.asdict(self.weights)
        d["reflection"] = dataclasses.asdict(self.reflection)
        return d


def build_backend(cfg: ExperimentConfig) -> Backend:
    models = {STRATEGIC: cfg.strategic_model, TACTICAL: cfg.tactical_model}
    if cfg.backend == "scripted":
        return scripted_backend()
    if cfg.backend == "remote":
        return RemoteBackend.from_env(models)
    if cfg.upstream == "scripted":
        upstream: Backend = scripted_backend()
    elif cfg.upstream == "offline":
        upstream = OfflineBackend()
    else:
        upstream = RemoteBackend.from_env(models)
    path = cfg.cache_file
    if path is None and cfg.out is not None:
        path = str(Path(cfg.out) / "cache.jsonl")
    return CachedBackend(upstream, path)


class EpisodeLog(Backend):
    """Per-episode wrapper that records every exchange for the transcript."""

    def __init__(self, inner: Backend, events: list[dict], side: str, clock: Callable[[], int]):
        self.inner = inner
        self.events = events
        self.side = side
        self.clock = clock

    def complete(self, req: CompletionRequest) -> str:
        reply = self.inner.complete(req)
        self.events.append({
            "type": "exchange",
            "tick": self.clock(),
            "side": self.side,
            "tier": req.tier,
            "purpose": req.purpose,
            "prompt": req.last_user,
            "reply": reply,
        })
        return reply


class GenerativeController:
    """One side driven by a strategic agent with a memory stream and tactical reviewers."""

    def __init__(
        self,
        side: str,
        backend: Backend,
        cfg: ExperimentConfig,
        events: list[dict],
        expert_doc: Optional[str] = None,
    ):
        self.side = side
        self.cfg = cfg
        self.events = events
        self.expert_doc = expert_doc
        self.stream = MemoryStream(f"{side} strategic agent")
        self.query = f"How can the {side} agents seize the control point?"
        self._tick = 0
        self.backend = EpisodeLog(backend, events, side, lambda: self._tick)

    def __call__(self, state: GameState) -> dict[int, Action]:
        now = self._tick = state.tick
        for text in strategic_observations(state, self.side):
            self.stream.record(OBSERVATION, text, now, self.backend)
        for r in maybe_reflect(self.stream, self.cfg.reflection, self.backend, now, self.cfg.weights):
            self.events.append({"type": "reflection", "tick": now, "side": self.side,
                                "text": r.description, "sources": list(r.sources)})
        recalled = retrieve(self.stream, self.query, self.cfg.weights, now, self.backend)
        memories = [f"[tick {s.memory.created_at}, {s.memory.kind}] {s.memory.description}" for s in recalled]
        assignments, transcript = negotiate(
            state, self.side, self.backend, self.cfg.max_rounds,
            memories=memories, expert_doc=self.expert_doc,
        )
        self.events.append({"type": "negotiation", "tick": now, "side": self.side, **transcript.to_dict()})
        summary = "; ".join(f"unit {a.unit_id} {a.intent}" for a in assignments)
        self.stream.record(PLAN, f"{self.side} plan at tick {now}: {summary}", now, self.backend)
        view = side_view(state, self.side)
        orders = {a.unit_id: assignment_to_action(a, view.state) for a in assignments}
        self.events.append({
            "type": "symbols", "tick": now, "side": self.side,
            "symbols": {str(a.unit_id): symbol_for_intent(a.intent) for a in assignments},
        })
        return orders


class PolicyController:
    def __init__(self, side: str, policy: Callable):
        self.side = side
        self.policy = policy

    def __call__(self, state: GameState) -> dict[int, Action]:
        return self.policy(side_view(state, self.side), self.side)


@dataclass(frozen=True)
class TaskScores:
    kill: int
    goal: int
    survive: int

    @property
    def total(self) -> int:
        return self.kill + self.goal + self.survive


@dataclass
class EpisodeResult:
    index: int
    seed: int
    winner: str  # red, blue or draw
    reason: str  # capture, annihilation, max_ticks, mutual_destruction
    ticks: int
    initial: dict[str, int]
    survivors: dict[str, int]
    kills: dict[str, int]
    holding_ticks: dict[str, int]
    captured_by: Optional[str]
    trajectory_hash: str
    scores: dict[str, TaskScores] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scores"] = {side: dataclasses.asdict(s) for side, s in self.scores.items()}
        return d


def score_tasks(result: EpisodeResult, side: str) -> TaskScores:
    """Kill, goal and survive scores for one side of a finished episode."""
    kill = KILL_POINTS * result.kills[side]
    goal = HOLD_POINTS * result.holding_ticks[side]
    if result.captured_by == side:
        goal += CAPTURE_BONUS
    survive = SURVIVOR_POINTS * result.survivors[side]
    return TaskScores(kill, goal, survive)


def _controller(policy: str, side: str, backend: Optional[Backend], cfg: ExperimentConfig,
                seed: int, events: list[dict], expert_doc: Optional[str]):
    if policy == RULE:
        return PolicyController(side, rule_policy)
    if policy == RANDOM:
        return PolicyController(side, RandomPolicy(f"{seed}:{side}"))
    if backend is None:
        raise ConfigError(f"{policy} needs a language-model backend")
    return GenerativeController(side, backend, cfg, events, expert_doc if policy == GWAE else None)


def run_episode(
    cfg: ExperimentConfig,
    seed: int,
    backend: Optional[Backend] = None,
    *,
    index: int = 0,
    scenario: Optional[Scenario] = None,
    events: Optional[list[dict]] = None,
) -> EpisodeResult:
    """Play one episode to a winner or the tick limit.

    ``events`` (if given) collects the transcript. On a failure the partial
    transcript travels on the raised :class:`EpisodeError`.
    """
    scenario = scenario or load_scenario(cfg.scenario)
    events = events if events is not None else []
    expert_doc = load_expert_doc(cfg.expert_doc) if GWAE in (cfg.red, cfg.blue) else None
    if backend is None and cfg.uses_llm:
        backend = build_backend(cfg)
    controllers = {
        RED: _controller(cfg.red, RED, backend, cfg, seed, events, expert_doc),
        BLUE: _controller(cfg.blue, BLUE, backend, cfg, seed, events, expert_doc),
    }
    state = scenario.initial_state(seed)
    initial = {side: len(state.living(side)) for side in SIDES}
    holding = {side: 0 for side in SIDES}
    traj = hashlib.sha256(state.digest().encode())
    cp = state.map.control_point
    try:
        while not state.over:
            orders: dict[int, Action] = {}
            for side in SIDES:
                if state.living(side):
                    orders.update(controllers[side](state))
            events.append({"type": "orders", "tick": state.tick,
                           "orders": {str(uid): str(a) for uid, a in sorted(orders.items())}})
            state = step(state, orders)
            traj.update(state.digest().encode())
            for side in SIDES:
                if any(u.pos == cp for u in state.living(side)):
                    holding[side] += 1
    except Exception as exc:
        events.append({"type": "error", "tick": state.tick, "error": f"{type(exc).__name__}: {exc}"})
        raise EpisodeError(f"episode {index} (seed {seed}) failed at tick {state.tick}: {exc}", events) from exc

    survivors = {side: len(state.living(side)) for side in SIDES}
    kills = {side: initial[opponent(side)] - survivors[opponent(side)] for side in SIDES}
    if state.winner is not None:
        winner = state.winner
        on_point = any(u.pos == cp for u in state.living(winner))
        reason = "capture" if on_point else "annihilation"
        captured_by = winner if on_point else None
    else:
        winner = "draw"
        reason = "mutual_destruction" if not any(survivors.values()) else "max_ticks"
        captured_by = None
    result = EpisodeResult(
        index=index, seed=seed, winner=winner, reason=reason, ticks=state.tick,
        initial=initial, survivors=survivors, kills=kills, holding_ticks=holding,
        captured_by=captured_by, trajectory_hash=traj.hexdigest(),
    )
    result.scores = {side: score_tasks(result, side) for side in SIDES}
    events.append({"type": "result", **result.to_dict()})
    return result


def _mean_std(values: list[float]) -> dict[str, float]:
    if not values:
        return {"mean": 0.0, "std": 0.0}
    return {"mean": statistics.fmean(values), "std": statistics.pstdev(values)}


@dataclass
class MetricsReport:
    config: dict
    results: list[EpisodeResult]
    failures: list[dict] = field(default_factory=list)
    cache: Optional[dict] = None

    def win_rate(self, side: str) -> float:
        if not self.results:
            return 0.0
        return sum(r.winner == side for r in self.results) / len(self.results)

    def win_rate_series(self, side: str) -> list[float]:
        series, wins = [], 0
        for i, r in enumerate(self.results, 1):
            wins += r.winner == side
            series.append(wins / i)
        return series

    def score_summary(self, side: str) -> dict[str, dict[str, float]]:
        return {
            task: _mean_std([getattr(r.scores[side], task) for r in self.results])
            for task in ("kill", "goal", "survive")
        }

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "episodes": len(self.results),
            "failures": self.failures,
            "win_rate": {
                RED: self.win_rate(RED),
                BLUE: self.win_rate(BLUE),
                "draw": self.win_rate("draw"),
            },
            "win_rate_series": {
                f"{RED}:{self.config['red']}": self.win_rate_series(RED),
                f"{BLUE}:{self.config['blue']}": self.win_rate_series(BLUE),
            },
            "scores": {side: self.score_summary(side) for side in SIDES},
            "cache": self.cache,
        }

    def csv_text(self, side: str = RED) -> str:
        """Per-episode rows; task scores are from ``side``'s point of view."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.results:
            s = r.scores[side]
            writer.writerow([r.index, r.seed, r.winner, r.ticks, s.kill, s.goal, s.survive, r.trajectory_hash])
        return buf.getvalue()


def _write_transcript(directory: Path, index: int, seed: int, events: list[dict]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"episode_{index:04d}_seed_{seed}.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for e in events:
            fh.write(json.dumps(e, sort_keys=True, ensure_ascii=False) + "\n")


def run_experiment(cfg: ExperimentConfig, backend: Optional[Backend] = None) -> MetricsReport:
    """Run ``cfg.episodes`` seeded episodes and write outputs under ``cfg.out``."""
    cfg.validate()
    scenario = load_scenario(cfg.scenario)
    if backend is None and cfg.uses_llm:
        backend = build_backend(cfg)
    out = Path(cfg.out) if cfg.out is not None else None
    if cfg.episodes == 0:
        logger.warning("experiment has zero episodes; writing an empty report")

    def one(index: int):
        seed = cfg.seed + index
        events: list[dict] = []
        try:
            result = run_episode(cfg, seed, backend, index=index, scenario=scenario, events=events)
            error = None
        except EpisodeError as exc:
            logger.error("%s", exc)
            result, error = None, str(exc)
        if out is not None:
            _write_transcript(out / "transcripts", index, seed, events)
        return index, seed, result, error

    indices = range(cfg.episodes)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(one, indices))
    else:
        outcomes = [one(i) for i in indices]

    results = [r for _, _, r, _ in outcomes if r is not None]
    failures = [{"episode": i, "seed": s, "error": e} for i, s, r, e in outcomes if r is None]
    cache = backend.stats.as_dict() if isinstance(backend, CachedBackend) else None
    report = MetricsReport(cfg.echo(), results, failures, cache)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(report.csv_text(), encoding="utf-8")
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report
