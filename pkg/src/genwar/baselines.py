"""Non-LLM controllers: a greedy rule AI and a uniform random AI.

Both read only a :class:`~genwar.sim.SideView`, never the full game state.
"""

from __future__ import annotations

import random
from typing import Protocol

from .sim import HOLD, Action, SideView, greedy_step, hex_distance


class Policy(Protocol):
    def __call__(self, view: SideView, side: str) -> dict[int, Action]: ...


def rule_policy(view: SideView, side: str) -> dict[int, Action]:
    """Shoot the nearest enemy in range, otherwise step toward the flag."""
    orders: dict[int, Action] = {}
    enemies = view.enemies()
    for u in view.own_units():
        reach = min(u.weapon_range, u.vision_range)
        in_range = [e for e in enemies if hex_distance(u.pos, e.pos) <= reach]
        if in_range:
            nearest = min(in_range, key=lambda e: (hex_distance(u.pos, e.pos), e.id))
            orders[u.id] = Action.shoot(nearest.id)
            continue
        step = greedy_step(view.state, u.id, view.control_point)
        orders[u.id] = step if step is not None else HOLD
    return orders


class RandomPolicy:
    """Uniform choice among each unit's legal actions, from an owned RNG."""

    def __init__(self, seed: int | str | None = None, rng: random.Random | None = None):
        self.rng = rng if rng is not None else random.Random(seed)

    def __call__(self, view: SideView, side: str) -> dict[int, Action]:
        return random_policy(view, side, self.rng)


def random_policy(view: SideView, side: str, rng: random.Random) -> dict[int, Action]:
    return {u.id: rng.choice(view.legal_actions(u.id)) for u in view.own_units()}
