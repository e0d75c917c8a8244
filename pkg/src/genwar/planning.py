"""Two-layer task planning.

A strategic agent turns the side's observations into a ``Summary /
Observations / Planning`` prompt and assigns one task per living unit.
Tactical agents, each seeing only its own unit's observations, accept or
push back. The strategic agent replans with the objections until every
tactical agent accepts or the round cap is hit.

Plan replies use one line per unit::

    unit <id> | <intent words> | <target or -> | <code>

Codes: 1-6 move one hex E, NE, NW, W, SW, SE; 7 accelerate toward the
target; 8 shoot the target; 9 defend; 10 evade. Hold has no code and is
what an unusable order degrades to.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from . import prompts
from .backends import STRATEGIC, TACTICAL, Backend, BackendError, CompletionRequest
from .hexgrid import HexCoord, neighbor_in_direction
from .sim import (
    DEFEND,
    EVADE,
    HOLD,
    Action,
    ActionKind,
    GameState,
    ObservationRecord,
    Unit,
    UnknownUnitError,
    greedy_step,
    hex_distance,
    legal_actions,
    opponent,
    side_observations,
    visible_units,
)

logger = logging.getLogger(__name__)

ACCEPT = "accept"
MODIFY = "modify"
FIXPOINT = "fixpoint"
ROUND_CAP = "round_cap"
DEFAULT_MAX_ROUNDS = 3

ACTION_CODES = {
    1: "move E", 2: "move NE", 3: "move NW", 4: "move W", 5: "move SW", 6: "move SE",
    7: "accelerate toward target", 8: "shoot target", 9: "defend", 10: "evade",
}

Target = Union[int, HexCoord, None]


class PlanningError(Exception):
    pass


class PlanParseError(PlanningError):
    def __init__(self, message: str, reply: str):
        self.reply = reply
        super().__init__(message)


class UnknownActionCodeError(PlanningError, ValueError):
    pass


class NegotiationError(PlanningError):
    def __init__(self, message: str, transcript: "NegotiationTranscript"):
        self.transcript = transcript
        super().__init__(message)


@dataclass(frozen=True)
class TaskAssignment:
    unit_id: int
    intent: str
    action_code: int
    target: Target = None

    def describe(self) -> str:
        return f"unit {self.unit_id} | {self.intent} | {format_target(self.target)} | {self.action_code}"


@dataclass(frozen=True)
class Suggestion:
    unit_id: int
    verdict: str
    proposed_intent: Optional[str] = None
    reason: str = ""

    def __post_init__(self) -> None:
        if self.verdict not in (ACCEPT, MODIFY):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == MODIFY and not (self.proposed_intent and self.reason):
            raise ValueError("a modify suggestion needs a proposed intent and a reason")

    def describe(self) -> str:
        return f"unit {self.unit_id} asks to modify its task: {self.proposed_intent}. Reason: {self.reason}"


@dataclass(frozen=True)
class StrategicPrompt:
    side: str
    summary: str
    observations: tuple[str, ...]
    unit_ids: tuple[int, ...]
    control_point: HexCoord
    weapon_range: int = 2
    memories: tuple[str, ...] = ()
    expert_doc: Optional[str] = None
    suggestions: tuple[Suggestion, ...] = ()

    def __post_init__(self) -> None:
        if self.unit_ids and (not self.summary.strip() or not self.observations):
            raise ValueError("summary and observations are required while friendly units live")

    def render(self) -> str:
        return prompts.render(
            "strategic",
            expert_doc=expert_block(self.expert_doc),
            side=self.side,
            enemy=opponent(self.side),
            control_point=self.control_point.label(),
            weapon_range=self.weapon_range,
            summary=self.summary,
            observations=_bullets(self.observations),
            memories=_bullets(self.memories),
            suggestions=_bullets([s.describe() for s in self.suggestions]),
            unit_ids=", ".join(str(i) for i in self.unit_ids),
        )


@dataclass
class Round:
    plan: list[TaskAssignment]
    suggestions: list[Suggestion]

    @property
    def all_accept(self) -> bool:
        return all(s.verdict == ACCEPT for s in self.suggestions)


@dataclass
class NegotiationTranscript:
    rounds: list[Round] = field(default_factory=list)
    terminated_by: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "terminated_by": self.terminated_by,
            "rounds": [
                {
                    "plan": [a.describe() for a in r.plan],
                    "suggestions": [
                        {"unit": s.unit_id, "verdict": s.verdict, "proposed": s.proposed_intent, "reason": s.reason}
                        for s in r.suggestions
                    ],
                }
                for r in self.rounds
            ],
        }


def expert_block(doc: Optional[str]) -> str:
    if not doc:
        return ""
    return prompts.render("expert_block", expert_doc=doc)


def _bullets(lines: Sequence[str]) -> str:
    if not lines:
        return "- none"
    return "\n".join(f"- {line}" for line in lines)


def format_target(target: Target) -> str:
    if target is None:
        return "-"
    if isinstance(target, HexCoord):
        return target.label()
    return f"unit {target}"


# -- situation summary ---------------------------------------------------------

def strategic_observations(state: GameState, side: str) -> list[str]:
    """Side-wide observation sentences, one per observed unit, own units first."""
    seen: dict[int, ObservationRecord] = {}
    for rec in side_observations(state, side):
        seen.setdefault(rec.observed_id, rec)
    ordered = sorted(seen.values(), key=lambda r: (r.observed_side != side, r.observed_id))
    return [r.description for r in ordered]


def summarize_situation(state: GameState, side: str, backend: Backend) -> str:
    friendly = state.living(side)
    if not friendly:
        raise PlanningError(f"{side} has no living units to summarise")
    records = side_observations(state, side)
    enemies = {r.observed_id for r in records if r.observed_side != side}
    advancing = sum(1 for u in friendly if u.last_action is not None and u.last_action.moves)
    text = prompts.render(
        "summary",
        side=side,
        friendly_count=len(friendly),
        advancing_count=advancing,
        enemy_count=len(enemies),
        observations=_bullets(strategic_observations(state, side)),
    )
    reply = backend.complete(CompletionRequest.user(STRATEGIC, text, purpose="summary"))
    return " ".join(reply.split())


# -- plan parsing ----------------------------------------------------------------

_LINE = re.compile(r"^\s*[-*]?\s*unit\s+(\d+)\s*\|\s*(.*?)\s*\|\s*(.*?)\s*\|\s*(\d+)\s*\.?\s*$", re.I | re.M)
_HEX = re.compile(r"(?:hexagon|hex)?\s*(\d{3,4})\b", re.I)
_UNIT_REF = re.compile(r"(?:(red|blue)\s+)?(?:agent|unit)?\s*(\d{1,2})\b", re.I)


def parse_target(text: str, control_point: HexCoord) -> Target:
    t = text.strip().lower()
    if t in ("", "-", "none", "n/a"):
        return None
    if "control point" in t or t in ("cp", "flag"):
        return control_point
    m = _HEX.fullmatch(t)
    if m:
        return HexCoord.from_id(m.group(1))
    m = _UNIT_REF.fullmatch(t)
    if m:
        return int(m.group(2))
    raise ValueError(f"unrecognised target {text!r}")


def parse_plan_lines(reply: str, control_point: HexCoord) -> dict[int, TaskAssignment]:
    out: dict[int, TaskAssignment] = {}
    for m in _LINE.finditer(reply):
        uid, intent, target, code = int(m.group(1)), m.group(2), m.group(3), int(m.group(4))
        if uid in out:
            continue
        if code not in ACTION_CODES:
            logger.warning("plan line for unit %d has unknown code %d, ignored", uid, code)
            continue
        try:
            tgt = parse_target(target, control_point)
        except ValueError as exc:
            logger.warning("plan line for unit %d ignored: %s", uid, exc)
            continue
        out[uid] = TaskAssignment(uid, intent or ACTION_CODES[code], code, tgt)
    return out


_CLAUSE_SPLIT = re.compile(r"[,;.\n]|\bwhile\b|\bwhereas\b", re.I)
_SUBJECT = re.compile(r"(?:\b(red|blue)\s+)?\bagents?\s+(\d+)(?:\s*(?:-|–|to)\s*(\d+))?", re.I)
_SHOOT_WORDS = re.compile(r"engag|attack|shoot|fire|aim|strike", re.I)
_MOVE_WORDS = re.compile(r"move|advanc|head|rush|approach|seiz|captur|go\b", re.I)
_DEFEND_WORDS = re.compile(r"defend|hold", re.I)
_EVADE_WORDS = re.compile(r"evad|retreat|withdraw", re.I)
_ENEMY_REF = re.compile(r"\b(red|blue)\s+agents?\s+(\d+)", re.I)


def parse_plan_prose(reply: str, side: str, control_point: HexCoord) -> dict[int, TaskAssignment]:
    """Best-effort reading of free prose such as
    "red agent 1-3 will prioritize engaging blue agent 1, while agents 4-10
    will quickly move towards the control point"."""
    out: dict[int, TaskAssignment] = {}
    enemy = opponent(side)
    for clause in _CLAUSE_SPLIT.split(reply):
        subject = None
        for m in _SUBJECT.finditer(clause):
            if m.group(1) is None or m.group(1).lower() == side:
                subject = m
                break
        if subject is None:
            continue
        lo = int(subject.group(2))
        hi = int(subject.group(3) or lo)
        rest = clause[subject.end():]
        target: Target = None
        enemy_ref = next((e for e in _ENEMY_REF.finditer(rest) if e.group(1).lower() == enemy), None)
        hex_ref = re.search(r"hexagon\s+(\d{3,4})", rest, re.I)
        if _SHOOT_WORDS.search(rest) and enemy_ref:
            target = int(enemy_ref.group(2))
            intent, code = f"engage {enemy} agent {target}", 8
        elif _MOVE_WORDS.search(rest) and re.search(r"control point|flag|objective", rest, re.I):
            target = control_point
            intent, code = "move towards the control point", 7
        elif _MOVE_WORDS.search(rest) and hex_ref:
            target = HexCoord.from_id(hex_ref.group(1))
            intent, code = f"move to hexagon {target.label()}", 7
        elif _EVADE_WORDS.search(rest):
            intent, code = "evade", 10
        elif _DEFEND_WORDS.search(rest):
            intent, code = "defend position", 9
        else:
            continue
        for uid in range(lo, hi + 1):
            out.setdefault(uid, TaskAssignment(uid, intent, code, target))
    return out


def parse_plan(reply: str, side: str, unit_ids: Sequence[int], control_point: HexCoord) -> list[TaskAssignment]:
    """Structured lines first, prose for whatever they miss. Raises if a unit stays unassigned."""
    found = parse_plan_lines(reply, control_point)
    missing = [u for u in unit_ids if u not in found]
    if missing:
        prose = parse_plan_prose(reply, side, control_point)
        for u in missing:
            if u in prose:
                found[u] = prose[u]
    missing = [u for u in unit_ids if u not in found]
    if missing:
        raise PlanParseError(f"plan reply leaves units {missing} unassigned", reply)
    extra = sorted(set(found) - set(unit_ids))
    if extra:
        logger.info("plan reply names units %s that are not alive; dropped", extra)
    return [found[u] for u in unit_ids]


def plan(prompt: StrategicPrompt, backend: Backend) -> list[TaskAssignment]:
    text = prompt.render()
    reply = backend.complete(CompletionRequest.user(STRATEGIC, text, purpose="plan"))
    try:
        return parse_plan(reply, prompt.side, prompt.unit_ids, prompt.control_point)
    except PlanParseError as first:
        logger.warning("strategic reply unusable (%s); asking again", first)
    retry = text + "\n" + prompts.render("strategic_retry", unit_ids=", ".join(map(str, prompt.unit_ids)))
    reply = backend.complete(CompletionRequest.user(STRATEGIC, retry, purpose="plan"))
    return parse_plan(reply, prompt.side, prompt.unit_ids, prompt.control_point)


# -- tactical review -------------------------------------------------------------

def format_unit_view(records: Sequence[ObservationRecord], observer: Unit) -> str:
    lines = [
        f"- (seen by {observer.name}, distance {r.distance}) {r.description}"
        for r in records
        if r.observer_id == observer.id
    ]
    return "\n".join(lines) if lines else "- nothing"


def tactical_prompt(a: TaskAssignment, local_view: Sequence[ObservationRecord], unit: Unit, round_no: int = 1) -> str:
    return prompts.render(
        "tactical",
        unit_name=unit.name,
        round=round_no,
        assignment=a.describe(),
        weapon_range=unit.weapon_range,
        unit_view=format_unit_view(local_view, unit),
    )


def parse_suggestion(reply: str, unit_id: int) -> Suggestion:
    text = reply.strip()
    head = text.split("|", 1)[0].strip().lower()
    if head.startswith(ACCEPT):
        return Suggestion(unit_id, ACCEPT)
    if head.startswith(MODIFY):
        parts = [p.strip() for p in text.split("|")]
        if len(parts) >= 3 and parts[1] and parts[2]:
            return Suggestion(unit_id, MODIFY, parts[1], " | ".join(parts[2:]))
    raise ValueError(f"unparsable tactical reply {reply!r}")


def tactical_review(
    a: TaskAssignment,
    local_view: Sequence[ObservationRecord],
    backend: Backend,
    *,
    unit: Unit,
    round_no: int = 1,
) -> Suggestion:
    """Review one assignment using only ``unit``'s own observations."""
    if not unit.alive:
        raise UnknownUnitError(f"unit {unit.id} is dead")
    text = tactical_prompt(a, local_view, unit, round_no)
    reply = backend.complete(CompletionRequest.user(TACTICAL, text, purpose="tactical"))
    try:
        return parse_suggestion(reply, a.unit_id)
    except ValueError as exc:
        logger.warning("unit %d: %s; counted as accept", a.unit_id, exc)
        return Suggestion(a.unit_id, ACCEPT, reason="unparsable reply counted as accept")


# -- negotiation -----------------------------------------------------------------

def negotiate(
    state: GameState,
    side: str,
    backend: Backend,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    *,
    summary: Optional[str] = None,
    memories: Sequence[str] = (),
    expert_doc: Optional[str] = None,
) -> tuple[list[TaskAssignment], NegotiationTranscript]:
    """Plan, review, replan with objections; stop at all-accept or ``max_rounds``."""
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    friendly = state.living(side)
    if not friendly:
        raise PlanningError(f"{side} has no living units")
    transcript = NegotiationTranscript()
    try:
        if summary is None:
            summary = summarize_situation(state, side, backend)
        observations = tuple(strategic_observations(state, side))
        views = {u.id: visible_units(state, u) for u in friendly}
        units = {u.id: u for u in friendly}
        pending: tuple[Suggestion, ...] = ()
        assignments: list[TaskAssignment] = []
        for round_no in range(1, max_rounds + 1):
            prompt = StrategicPrompt(
                side=side,
                summary=summary,
                observations=observations,
                unit_ids=tuple(units),
                control_point=state.map.control_point,
                weapon_range=max(u.weapon_range for u in friendly),
                memories=tuple(memories),
                expert_doc=expert_doc,
                suggestions=pending,
            )
            assignments = plan(prompt, backend)
            reviews = [
                tactical_review(a, views[a.unit_id], backend, unit=units[a.unit_id], round_no=round_no)
                for a in assignments
            ]
            rnd = Round(assignments, reviews)
            transcript.rounds.append(rnd)
            if rnd.all_accept:
                transcript.terminated_by = FIXPOINT
                break
            pending = tuple(s for s in reviews if s.verdict == MODIFY)
        else:
            transcript.terminated_by = ROUND_CAP
    except (BackendError, PlanningError) as exc:
        raise NegotiationError(f"negotiation for {side} failed: {exc}", transcript) from exc
    return assignments, transcript


# -- plan to action --------------------------------------------------------------

def _resolve_point(target: Target, state: GameState) -> Optional[HexCoord]:
    if isinstance(target, HexCoord):
        return target
    if target is None:
        return state.map.control_point
    try:
        u = state.unit(target)
    except UnknownUnitError:
        return None
    return u.pos if u.alive else None


def _advance(state: GameState, unit: Unit, goal: HexCoord) -> Action:
    first = greedy_step(state, unit.id, goal)
    if first is None:
        return HOLD
    here = hex_distance(unit.pos, goal)
    dash = Action.accelerate(first.direction)
    if here >= 2 and dash in legal_actions(state, unit.id):
        mid = neighbor_in_direction(unit.pos, first.direction, state.map.rows, state.map.cols)
        land = neighbor_in_direction(mid, first.direction, state.map.rows, state.map.cols)
        if hex_distance(land, goal) == here - 2:
            return dash
    return first


def assignment_to_action(a: TaskAssignment, state: GameState) -> Action:
    """Map an assignment to a concrete order; unusable orders become Hold."""
    unit = state.unit(a.unit_id)
    if not unit.alive:
        raise UnknownUnitError(f"unit {a.unit_id} is dead")
    code = a.action_code
    if code not in ACTION_CODES:
        raise UnknownActionCodeError(f"unknown action code {code}")
    if 1 <= code <= 6:
        action = Action.move(code - 1)
    elif code == 7:
        goal = _resolve_point(a.target, state)
        action = HOLD if goal is None else _advance(state, unit, goal)
    elif code == 8:
        if not isinstance(a.target, int):
            logger.info("unit %d: shoot order without a unit target, holding", a.unit_id)
            return HOLD
        action = Action.shoot(a.target)
    elif code == 9:
        action = DEFEND
    else:
        action = EVADE
    if action is not HOLD and action not in legal_actions(state, unit.id):
        logger.info("unit %d: %s is not legal now, holding", unit.id, action)
        return HOLD
    return action


def symbol_for_intent(intent: str) -> str:
    """Overlay glyph: "!" for capture/control, "→" for aim/shoot, "·" otherwise."""
    text = intent.lower()
    if re.search(r"captur|seiz|\bcontrol(?:ling)?\b(?!\s+point)", text):
        return "!"
    if re.search(r"aim|shoot|fire|engag|attack", text):
        return "→"
    return "·"
