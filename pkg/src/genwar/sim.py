"""Deterministic turn-based hex wargame: state, fog of war, actions, resolution.

States are immutable values. :func:`step` takes a state and a map of orders
and returns the next state. Shots resolve before moves, and two units moving
into one cell are settled in favour of the lower unit id.
"""

from __future__ import annotations

import enum
import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from . import hexgrid
from .hexgrid import DIRECTIONS, HexCoord

RED = "red"
BLUE = "blue"
SIDES = (RED, BLUE)
TERRAIN_TAGS = ("open", "road", "urban")

DEFAULT_VISION_RANGE = 4
DEFAULT_WEAPON_RANGE = 2
DEFAULT_HIT_BASE = 0.6
URBAN_COVER_PENALTY = 0.2
EVADE_PENALTY = 0.2
DEFEND_PENALTY = 0.1
DEFAULT_MAX_TICKS = 200


class SimError(Exception):
    pass


class UnknownUnitError(SimError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0])


class IllegalActionError(SimError):
    def __init__(self, unit_id: int, action: "Action", reason: str):
        self.unit_id = unit_id
        self.action = action
        super().__init__(f"unit {unit_id}: illegal action {action} ({reason})")


def opponent(side: str) -> str:
    return BLUE if side == RED else RED


@dataclass(frozen=True)
class MapSpec:
    rows: int
    cols: int
    terrain: tuple[tuple[str, ...], ...]
    control_point: HexCoord

    def __post_init__(self) -> None:
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("map must have at least one row and column")
        if len(self.terrain) != self.rows or any(len(r) != self.cols for r in self.terrain):
            raise ValueError(f"terrain grid must be {self.rows}x{self.cols}")
        for row in self.terrain:
            for tag in row:
                if tag not in TERRAIN_TAGS:
                    raise ValueError(f"unknown terrain tag {tag!r}")
        if not self.contains(self.control_point):
            raise ValueError(f"control point {self.control_point} outside the map")

    @classmethod
    def uniform(cls, rows: int, cols: int, control_point: HexCoord, tag: str = "open") -> "MapSpec":
        return cls(rows, cols, tuple(tuple(tag for _ in range(cols)) for _ in range(rows)), control_point)

    def contains(self, c: HexCoord) -> bool:
        return hexgrid.in_bounds(c.row, c.col, self.rows, self.cols)

    def terrain_at(self, c: HexCoord) -> str:
        return self.terrain[c.row][c.col]


def hex_neighbors(c: HexCoord, m: MapSpec) -> list[HexCoord]:
    """In-bounds neighbours in fixed order E, NE, NW, W, SW, SE."""
    return hexgrid.neighbors(c, m.rows, m.cols)


def hex_distance(a: HexCoord, b: HexCoord) -> int:
    return hexgrid.distance(a, b)


class ActionKind(enum.Enum):
    MOVE = "move"
    ACCELERATE = "accelerate"
    SHOOT = "shoot"
    DEFEND = "defend"
    EVADE = "evade"
    HOLD = "hold"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    direction: Optional[int] = None
    target: Optional[int] = None

    @classmethod
    def move(cls, direction: int) -> "Action":
        return cls(ActionKind.MOVE, direction=direction)

    @classmethod
    def accelerate(cls, direction: int) -> "Action":
        return cls(ActionKind.ACCELERATE, direction=direction)

    @classmethod
    def shoot(cls, target: int) -> "Action":
        return cls(ActionKind.SHOOT, target=target)

    @property
    def code(self) -> int:
        """Plan code: 1-6 move, 7 accelerate, 8 shoot, 9 defend, 10 evade.

        Hold is the fallback order and carries code 0.
        """
        if self.kind is ActionKind.MOVE:
            return self.direction + 1
        return _KIND_CODES[self.kind]

    @property
    def moves(self) -> bool:
        return self.kind in (ActionKind.MOVE, ActionKind.ACCELERATE)

    def __str__(self) -> str:
        if self.direction is not None:
            return f"{self.kind.value}({DIRECTIONS[self.direction]})"
        if self.target is not None:
            return f"{self.kind.value}({self.target})"
        return self.kind.value


_KIND_CODES = {
    ActionKind.ACCELERATE: 7,
    ActionKind.SHOOT: 8,
    ActionKind.DEFEND: 9,
    ActionKind.EVADE: 10,
    ActionKind.HOLD: 0,
}

HOLD = Action(ActionKind.HOLD)
DEFEND = Action(ActionKind.DEFEND)
EVADE = Action(ActionKind.EVADE)


@dataclass(frozen=True)
class Unit:
    id: int
    side: str
    pos: HexCoord
    alive: bool = True
    speed_boost: bool = False
    vision_range: int = DEFAULT_VISION_RANGE
    weapon_range: int = DEFAULT_WEAPON_RANGE
    hit_base: float = DEFAULT_HIT_BASE
    last_action: Optional[Action] = None

    def __post_init__(self) -> None:
        if self.side not in SIDES:
            raise ValueError(f"unit {self.id}: unknown side {self.side!r}")
        if not 0.0 <= self.hit_base <= 1.0:
            raise ValueError(f"unit {self.id}: hit_base must lie in [0, 1]")
        if self.vision_range < 0 or self.weapon_range < 0:
            raise ValueError(f"unit {self.id}: ranges must be non-negative")

    @property
    def name(self) -> str:
        return f"{self.side} agent {self.id}"


@dataclass(frozen=True)
class GameState:
    map: MapSpec
    units: tuple[Unit, ...]
    tick: int = 0
    rng_state: Optional[tuple] = field(default=None, repr=False)
    winner: Optional[str] = None
    draw: bool = False
    # True when both sides tried to land on the control point in the last step
    contested: bool = False
    max_ticks: int = DEFAULT_MAX_TICKS

    @property
    def over(self) -> bool:
        return self.winner is not None or self.draw

    def unit(self, unit_id: int) -> Unit:
        for u in self.units:
            if u.id == unit_id:
                return u
        raise UnknownUnitError(f"unknown unit id {unit_id}")

    def living(self, side: Optional[str] = None) -> list[Unit]:
        return [u for u in self.units if u.alive and (side is None or u.side == side)]

    def occupant(self, c: HexCoord) -> Optional[Unit]:
        for u in self.units:
            if u.alive and u.pos == c:
                return u
        return None

    def canonical(self) -> dict:
        """JSON-ready snapshot used for trajectory hashing."""
        units = []
        for u in self.units:
            la = u.last_action
            units.append([
                u.id, u.side, u.pos.row, u.pos.col, u.alive, u.speed_boost,
                None if la is None else [la.kind.value, la.direction, la.target],
            ])
        rng = None
        if self.rng_state is not None:
            rng = hashlib.sha256(repr(self.rng_state).encode()).hexdigest()
        return {
            "tick": self.tick,
            "winner": self.winner,
            "draw": self.draw,
            "contested": self.contested,
            "units": units,
            "rng": rng,
        }

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def new_game(map_spec: MapSpec, units: list[Unit], seed: int, max_ticks: int = DEFAULT_MAX_TICKS) -> GameState:
    ids = [u.id for u in units]
    if len(set(ids)) != len(ids):
        raise ValueError("unit ids must be unique")
    seen: set[HexCoord] = set()
    for u in units:
        if not map_spec.contains(u.pos):
            raise ValueError(f"unit {u.id} placed outside the map at {u.pos}")
        if u.alive:
            if u.pos in seen:
                raise ValueError(f"two living units share hexagon {u.pos}")
            seen.add(u.pos)
    rng = random.Random(seed)
    ordered = tuple(sorted(units, key=lambda u: u.id))
    return GameState(map_spec, ordered, 0, rng.getstate(), max_ticks=max_ticks)


@dataclass(frozen=True)
class ObservationRecord:
    observer_id: int
    observed_id: int
    observed_side: str
    observed_pos: HexCoord
    tick: int
    description: str
    distance: int = 0


def describe_unit(state: GameState, u: Unit) -> str:
    """One natural-language sentence about what a unit is doing."""
    cp = state.map.control_point
    to_cp = hex_distance(u.pos, cp)
    la = u.last_action
    kind = la.kind if la is not None else ActionKind.HOLD
    terrain = state.map.terrain_at(u.pos)

    if to_cp == 0:
        activity = "seizing the control point"
    elif to_cp == 1:
        activity = "approaching the control point and trying to control it"
    elif kind is ActionKind.SHOOT:
        try:
            target = state.unit(la.target)
            activity = f"shooting at {target.name}"
        except UnknownUnitError:
            activity = "shooting"
    elif kind is ActionKind.ACCELERATE:
        where = " along the road" if terrain == "road" else ""
        activity = f"accelerating towards the control point{where}"
    elif kind is ActionKind.MOVE:
        if terrain == "road":
            activity = "moving along the road"
        elif terrain == "urban":
            activity = "moving through the urban residential area"
        else:
            activity = "moving across open ground"
    elif kind is ActionKind.EVADE:
        activity = "evading enemy fire"
    elif kind is ActionKind.DEFEND:
        activity = "defending its position"
    elif terrain == "urban":
        activity = "holding position in the urban residential area"
    else:
        activity = "holding position"
    return f"{u.name} is {activity} at hexagon {u.pos.label()}"


def visible_units(s: GameState, observer: Unit) -> list[ObservationRecord]:
    """Everything a living unit can see, itself included. Range is inclusive."""
    if not observer.alive:
        return []
    out = []
    for u in s.units:
        if not u.alive:
            continue
        d = hex_distance(observer.pos, u.pos)
        if d <= observer.vision_range:
            out.append(ObservationRecord(
                observer_id=observer.id,
                observed_id=u.id,
                observed_side=u.side,
                observed_pos=u.pos,
                tick=s.tick,
                description=describe_unit(s, u),
                distance=d,
            ))
    return out


def _living_unit(s: GameState, unit_id: int) -> Unit:
    u = s.unit(unit_id)
    if not u.alive:
        raise UnknownUnitError(f"unit {unit_id} is dead")
    return u


def legal_actions(s: GameState, unit_id: int) -> list[Action]:
    u = _living_unit(s, unit_id)
    occupied = {o.pos for o in s.units if o.alive}
    rows, cols = s.map.rows, s.map.cols
    moves, accels = [], []
    for d in range(len(DIRECTIONS)):
        first = hexgrid.neighbor_in_direction(u.pos, d, rows, cols)
        if first is None or first in occupied:
            continue
        moves.append(Action.move(d))
        second = hexgrid.neighbor_in_direction(first, d, rows, cols)
        if second is not None and second not in occupied:
            accels.append(Action.accelerate(d))
    shots = []
    reach = min(u.weapon_range, u.vision_range)
    for o in s.units:
        if o.alive and o.side != u.side and hex_distance(u.pos, o.pos) <= reach:
            shots.append(Action.shoot(o.id))
    return moves + accels + shots + [DEFEND, EVADE, HOLD]


def greedy_step(s: GameState, unit_id: int, target: HexCoord) -> Optional[Action]:
    """Legal single-hex move that most reduces distance to ``target``, if any."""
    u = _living_unit(s, unit_id)
    here = hex_distance(u.pos, target)
    best, best_d = None, here
    for a in legal_actions(s, unit_id):
        if a.kind is not ActionKind.MOVE:
            continue
        dest = hexgrid.neighbor_in_direction(u.pos, a.direction, s.map.rows, s.map.cols)
        d = hex_distance(dest, target)
        if d < best_d:
            best, best_d = a, d
    return best


def hit_probability(s: GameState, target: Unit, target_action: Optional[Action], shooter: Unit) -> float:
    p = shooter.hit_base
    if s.map.terrain_at(target.pos) == "urban":
        p -= URBAN_COVER_PENALTY
    if target_action is not None:
        if target_action.kind is ActionKind.EVADE:
            p -= EVADE_PENALTY
        elif target_action.kind is ActionKind.DEFEND:
            p -= DEFEND_PENALTY
    return min(1.0, max(0.0, p))


def check_victory(s: GameState) -> Optional[str]:
    cp = s.map.control_point
    holders = {u.side for u in s.units if u.alive and u.pos == cp}
    if len(holders) == 1:
        return holders.pop()
    if len(holders) > 1:
        return None
    red_alive = any(u.alive for u in s.units if u.side == RED)
    blue_alive = any(u.alive for u in s.units if u.side == BLUE)
    if red_alive and not blue_alive:
        return RED
    if blue_alive and not red_alive:
        return BLUE
    return None


def _path(u: Unit, a: Action, m: MapSpec) -> list[HexCoord]:
    hops = 2 if a.kind is ActionKind.ACCELERATE else 1
    cells, here = [], u.pos
    for _ in range(hops):
        here = hexgrid.neighbor_in_direction(here, a.direction, m.rows, m.cols)
        cells.append(here)
    return cells


def step(s: GameState, actions: Mapping[int, Action]) -> GameState:
    """Resolve one tick of simultaneous orders.

    Raises :class:`IllegalActionError` naming the first offending unit.
    """
    for uid in sorted(actions):
        try:
            legal = legal_actions(s, uid)
        except UnknownUnitError as exc:
            raise IllegalActionError(uid, actions[uid], str(exc)) from None
        if actions[uid] not in legal:
            raise IllegalActionError(uid, actions[uid], "not in legal_actions")

    units = {u.id: u for u in s.units}
    rng = random.Random()
    if s.rng_state is not None:
        rng.setstate(s.rng_state)

    # Fire phase: every order fires, one draw per shot in unit-id order.
    killed: set[int] = set()
    for uid in sorted(actions):
        a = actions[uid]
        if a.kind is not ActionKind.SHOOT:
            continue
        target = units[a.target]
        p = hit_probability(s, target, actions.get(target.id), units[uid])
        if rng.random() < p:
            killed.add(target.id)

    # Movement phase among survivors.
    movers = [uid for uid in sorted(actions) if actions[uid].moves and uid not in killed]
    paths = {uid: _path(units[uid], actions[uid], s.map) for uid in movers}
    cp = s.map.control_point
    cp_sides = {units[uid].side for uid in movers if paths[uid][-1] == cp}
    contested = len(cp_sides) > 1

    occupied = {u.pos: u.id for u in s.units if u.alive and u.id not in killed}
    new_pos: dict[int, HexCoord] = {}
    for uid in movers:
        dest = paths[uid][-1]
        if contested and dest == cp:
            continue
        if any(c in occupied for c in paths[uid]):
            continue
        del occupied[units[uid].pos]
        occupied[dest] = uid
        new_pos[uid] = dest

    updated = []
    for u in s.units:
        if not u.alive:
            updated.append(u)
            continue
        a = actions.get(u.id)
        updated.append(replace(
            u,
            alive=u.id not in killed,
            pos=new_pos.get(u.id, u.pos),
            speed_boost=u.id in new_pos and a.kind is ActionKind.ACCELERATE,
            last_action=a,
        ))

    nxt = replace(
        s,
        units=tuple(updated),
        tick=s.tick + 1,
        rng_state=rng.getstate() if s.rng_state is not None else None,
        contested=contested,
    )
    if s.over:
        return nxt
    winner = check_victory(nxt)
    if winner is not None:
        return replace(nxt, winner=winner)
    if not nxt.living(RED) and not nxt.living(BLUE):
        return replace(nxt, draw=True)
    if nxt.tick >= nxt.max_ticks:
        return replace(nxt, draw=True)
    return nxt


@dataclass(frozen=True)
class SideView:
    """A side's fog-of-war picture: own units plus enemies any of them can see.

    Only this type is handed to policies, so hidden enemies are unreachable.
    """

    side: str
    state: GameState

    @property
    def tick(self) -> int:
        return self.state.tick

    @property
    def control_point(self) -> HexCoord:
        return self.state.map.control_point

    def own_units(self) -> list[Unit]:
        return self.state.living(self.side)

    def enemies(self) -> list[Unit]:
        return self.state.living(opponent(self.side))

    def legal_actions(self, unit_id: int) -> list[Action]:
        return legal_actions(self.state, unit_id)


def side_view(s: GameState, side: str) -> SideView:
    own = [u for u in s.units if u.side == side]
    seers = [u for u in own if u.alive]
    seen = []
    for e in s.units:
        if e.side == side or not e.alive:
            continue
        if any(hex_distance(o.pos, e.pos) <= o.vision_range for o in seers):
            seen.append(e)
    restricted = replace(s, units=tuple(sorted(own + seen, key=lambda u: u.id)), rng_state=None)
    return SideView(side, restricted)


def side_observations(s: GameState, side: str) -> list[ObservationRecord]:
    """All observation records produced by a side's living units, observer-id order."""
    out = []
    for u in s.living(side):
        out.extend(visible_units(s, u))
    return out
