"""Hex-grid geometry on an odd-q offset layout.

Cells are addressed by ``(row, col)``. Odd columns are shoved half a hex
down. Every cell also has a four-digit ID, ``row * 100 + col``, so hexagon
``1403`` is row 14, column 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

# Direction labels in the fixed neighbour order. Each maps to an axial (q, r)
# delta; the labels follow the conventional axial ordering.
DIRECTIONS: tuple[str, ...] = ("E", "NE", "NW", "W", "SW", "SE")
_AXIAL_DELTAS: tuple[tuple[int, int], ...] = (
    (+1, 0),
    (+1, -1),
    (0, -1),
    (-1, 0),
    (-1, +1),
    (0, +1),
)


class HexBoundsError(ValueError):
    """A coordinate lies outside the map it was used with."""


@dataclass(frozen=True, order=True)
class HexCoord:
    row: int
    col: int

    def __post_init__(self) -> None:
        if self.row < 0 or self.col < 0:
            raise HexBoundsError(f"negative hex coordinate {self.row},{self.col}")
        if self.col >= 100:
            raise HexBoundsError(f"column {self.col} does not fit a four-digit hex id")

    @property
    def hex_id(self) -> int:
        return self.row * 100 + self.col

    @classmethod
    def from_id(cls, hex_id: int | str) -> "HexCoord":
        value = int(hex_id)
        return cls(value // 100, value % 100)

    def label(self) -> str:
        """Zero-padded four-digit ID, as used in prompts ("0503")."""
        return f"{self.hex_id:04d}"

    def __str__(self) -> str:
        return self.label()


def to_axial(c: HexCoord) -> tuple[int, int]:
    q = c.col
    r = c.row - (c.col - (c.col & 1)) // 2
    return q, r


def from_axial(q: int, r: int) -> tuple[int, int]:
    """Inverse of :func:`to_axial`; returns a raw ``(row, col)`` pair."""
    col = q
    row = r + (q - (q & 1)) // 2
    return row, col


def step(c: HexCoord, direction: int) -> tuple[int, int]:
    """Raw (row, col) of the neighbour in ``direction``. May be negative."""
    q, r = to_axial(c)
    dq, dr = _AXIAL_DELTAS[direction]
    return from_axial(q + dq, r + dr)


def in_bounds(row: int, col: int, rows: int, cols: int) -> bool:
    return 0 <= row < rows and 0 <= col < cols


def neighbors(c: HexCoord, rows: int, cols: int) -> list[HexCoord]:
    """In-bounds neighbours of ``c`` in the fixed direction order."""
    if not in_bounds(c.row, c.col, rows, cols):
        raise HexBoundsError(f"{c.row},{c.col} outside {rows}x{cols} map")
    out = []
    for d in range(6):
        row, col = step(c, d)
        if in_bounds(row, col, rows, cols):
            out.append(HexCoord(row, col))
    return out


def neighbor_in_direction(c: HexCoord, direction: int, rows: int, cols: int) -> HexCoord | None:
    row, col = step(c, direction)
    if in_bounds(row, col, rows, cols):
        return HexCoord(row, col)
    return None


def distance(a: HexCoord, b: HexCoord) -> int:
    aq, ar = to_axial(a)
    bq, br = to_axial(b)
    dq = aq - bq
    dr = ar - br
    return max(abs(dq), abs(dr), abs(dq + dr))


def iter_cells(rows: int, cols: int) -> Iterator[HexCoord]:
    for row in range(rows):
        for col in range(cols):
            yield HexCoord(row, col)
