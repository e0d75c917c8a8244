"""Scenario files: JSON with the board, the control point and the starting units.

Format::

    {"rows": 20, "cols": 20,
     "terrain": [["open", "road", ...], ...],
     "control_point": [10, 10],
     "units": [{"id": 1, "side": "red", "pos": [8, 2],
                "vision_range": 4, "weapon_range": 2, "hit_base": 0.6}, ...],
     "max_ticks": 200}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .hexgrid import HexCoord
from .sim import (
    BLUE,
    DEFAULT_HIT_BASE,
    DEFAULT_MAX_TICKS,
    DEFAULT_VISION_RANGE,
    DEFAULT_WEAPON_RANGE,
    RED,
    GameState,
    MapSpec,
    Unit,
    new_game,
)

DEFAULT_SCENARIO = "default"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    map: MapSpec
    units: tuple[Unit, ...]
    max_ticks: int = DEFAULT_MAX_TICKS

    def initial_state(self, seed: int) -> GameState:
        return new_game(self.map, list(self.units), seed, self.max_ticks)

    def to_dict(self) -> dict:
        return {
            "rows": self.map.rows,
            "cols": self.map.cols,
            "terrain": [list(r) for r in self.map.terrain],
            "control_point": [self.map.control_point.row, self.map.control_point.col],
            "units": [
                {
                    "id": u.id,
                    "side": u.side,
                    "pos": [u.pos.row, u.pos.col],
                    "vision_range": u.vision_range,
                    "weapon_range": u.weapon_range,
                    "hit_base": u.hit_base,
                }
                for u in self.units
            ],
            "max_ticks": self.max_ticks,
        }


def _coord(value, what: str) -> HexCoord:
    try:
        row, col = value
        return HexCoord(int(row), int(col))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{what}: expected [row, col], got {value!r}") from exc


def parse_scenario(data: dict) -> Scenario:
    missing = [k for k in ("rows", "cols", "terrain", "control_point", "units") if k not in data]
    if missing:
        raise ScenarioError(f"scenario is missing fields: {', '.join(missing)}")
    try:
        map_spec = MapSpec(
            rows=int(data["rows"]),
            cols=int(data["cols"]),
            terrain=tuple(tuple(row) for row in data["terrain"]),
            control_point=_coord(data["control_point"], "control_point"),
        )
        units = []
        for raw in data["units"]:
            units.append(Unit(
                id=int(raw["id"]),
                side=raw["side"],
                pos=_coord(raw["pos"], f"unit {raw.get('id')} pos"),
                vision_range=int(raw.get("vision_range", DEFAULT_VISION_RANGE)),
                weapon_range=int(raw.get("weapon_range", DEFAULT_WEAPON_RANGE)),
                hit_base=float(raw.get("hit_base", DEFAULT_HIT_BASE)),
            ))
        scenario = Scenario(map_spec, tuple(units), int(data.get("max_ticks", DEFAULT_MAX_TICKS)))
        # new_game performs the placement checks
        scenario.initial_state(0)
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc
    if scenario.max_ticks < 1:
        raise ScenarioError("max_ticks must be at least 1")
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    if str(path) == DEFAULT_SCENARIO:
        text = resources.files("genwar.data").joinpath("default_scenario.json").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario {path} is not valid JSON: {exc}") from exc
    return parse_scenario(data)


def build_default_scenario(rows: int = 20, cols: int = 20) -> Scenario:
    """20x20 board, road column through the centre, urban block by the flag.

    Six red units start on the west edge, five blue units on the east edge.
    """
    road_col = cols // 2
    cp = HexCoord(rows // 2, road_col)
    terrain = []
    for r in range(rows):
        row = []
        for c in range(cols):
            if c == road_col:
                row.append("road")
            elif cp.row - 2 <= r <= cp.row + 1 and road_col + 1 <= c <= road_col + 3:
                row.append("urban")
            elif cp.row + 2 <= r <= cp.row + 3 and road_col - 3 <= c <= road_col - 2:
                row.append("urban")
            else:
                row.append("open")
        terrain.append(tuple(row))
    map_spec = MapSpec(rows, cols, tuple(terrain), cp)
    units = []
    red_rows = [cp.row - 3, cp.row - 2, cp.row - 1, cp.row, cp.row + 1, cp.row + 2]
    for i, r in enumerate(red_rows):
        units.append(Unit(id=i + 1, side=RED, pos=HexCoord(r, 2)))
    blue_rows = [cp.row - 2, cp.row - 1, cp.row, cp.row + 1, cp.row + 2]
    for i, r in enumerate(blue_rows):
        units.append(Unit(id=len(red_rows) + i + 1, side=BLUE, pos=HexCoord(r, cols - 2)))
    return Scenario(map_spec, tuple(units), DEFAULT_MAX_TICKS)
