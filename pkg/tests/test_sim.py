import random

import pytest
from hypothesis import given, settings, strategies as st

from genwar.hexgrid import DIRECTIONS, HexCoord, neighbor_in_direction
from genwar.sim import (
    BLUE,
    DEFEND,
    EVADE,
    HOLD,
    RED,
    Action,
    ActionKind,
    IllegalActionError,
    MapSpec,
    Unit,
    UnknownUnitError,
    check_victory,
    describe_unit,
    hex_distance,
    hit_probability,
    legal_actions,
    new_game,
    side_view,
    step,
    visible_units,
)

CP = HexCoord(5, 5)
E, W = DIRECTIONS.index("E"), DIRECTIONS.index("W")


def toward(src: HexCoord, dest: HexCoord) -> int:
    return next(d for d in range(6) if neighbor_in_direction(src, d, 11, 11) == dest)


def small_game(*units, seed=0, max_ticks=200, cp=CP, rows=11, cols=11):
    return new_game(MapSpec.uniform(rows, cols, cp), list(units), seed, max_ticks)


def test_corner_unit_moves_only_in_bounds():
    s = small_game(Unit(1, RED, HexCoord(0, 0)), Unit(2, BLUE, HexCoord(10, 10)))
    moves = [a for a in legal_actions(s, 1) if a.kind is ActionKind.MOVE]
    dests = {neighbor_in_direction(HexCoord(0, 0), a.direction, 11, 11) for a in moves}
    assert dests == {HexCoord(0, 1), HexCoord(1, 0)}
    assert HOLD in legal_actions(s, 1) and DEFEND in legal_actions(s, 1) and EVADE in legal_actions(s, 1)


def test_occupied_cells_and_dead_units():
    s = small_game(Unit(1, RED, HexCoord(5, 2)), Unit(2, RED, HexCoord(5, 3)), Unit(3, BLUE, HexCoord(9, 9)))
    assert Action.move(E) not in legal_actions(s, 1)
    assert Action.accelerate(E) not in legal_actions(s, 1)
    dead = small_game(Unit(1, RED, HexCoord(0, 0), alive=False), Unit(2, BLUE, HexCoord(9, 9)))
    with pytest.raises(UnknownUnitError):
        legal_actions(dead, 1)
    with pytest.raises(UnknownUnitError):
        legal_actions(dead, 99)


def test_shoot_needs_range_and_sight():
    s = small_game(Unit(1, RED, HexCoord(5, 1)), Unit(2, BLUE, HexCoord(5, 3)), Unit(3, BLUE, HexCoord(5, 4)))
    shots = {a.target for a in legal_actions(s, 1) if a.kind is ActionKind.SHOOT}
    assert shots == {2}
    blind = small_game(Unit(1, RED, HexCoord(5, 1), vision_range=1), Unit(2, BLUE, HexCoord(5, 3)))
    assert not [a for a in legal_actions(blind, 1) if a.kind is ActionKind.SHOOT]


def test_illegal_order_is_rejected_naming_the_unit():
    s = small_game(Unit(1, RED, HexCoord(5, 1)), Unit(2, BLUE, HexCoord(5, 9)))
    with pytest.raises(IllegalActionError) as exc:
        step(s, {1: Action.shoot(2)})
    assert exc.value.unit_id == 1


def test_accelerate_moves_two_cells():
    s = small_game(Unit(1, RED, HexCoord(5, 0)), Unit(2, BLUE, HexCoord(0, 10)))
    nxt = step(s, {1: Action.accelerate(E)})
    u = nxt.unit(1)
    assert hex_distance(HexCoord(5, 0), u.pos) == 2 and u.speed_boost
    assert nxt.tick == 1


def test_lower_id_wins_a_contested_cell():
    # both units want (5, 3)
    s = small_game(Unit(1, RED, HexCoord(5, 2)), Unit(2, RED, HexCoord(5, 4)), Unit(3, BLUE, HexCoord(0, 10)))
    nxt = step(s, {1: Action.move(toward(HexCoord(5, 2), HexCoord(5, 3))),
                   2: Action.move(toward(HexCoord(5, 4), HexCoord(5, 3)))})
    assert nxt.unit(1).pos == HexCoord(5, 3)
    assert nxt.unit(2).pos == HexCoord(5, 4)


def test_hit_probability_modifiers():
    m = MapSpec(3, 3, (("open", "urban", "open"),) * 3, HexCoord(1, 1))
    s = new_game(m, [Unit(1, RED, HexCoord(0, 0)), Unit(2, BLUE, HexCoord(0, 1)), Unit(3, BLUE, HexCoord(0, 2))], 0)
    shooter = s.unit(1)
    assert hit_probability(s, s.unit(3), None, shooter) == pytest.approx(0.6)
    assert hit_probability(s, s.unit(2), None, shooter) == pytest.approx(0.4)
    assert hit_probability(s, s.unit(2), EVADE, shooter) == pytest.approx(0.2)
    assert hit_probability(s, s.unit(3), DEFEND, shooter) == pytest.approx(0.5)


def test_certain_hit_kills_before_movement():
    s = small_game(Unit(1, RED, HexCoord(5, 1), hit_base=1.0), Unit(2, BLUE, HexCoord(5, 2)))
    nxt = step(s, {1: Action.shoot(2), 2: Action.move(W)})
    assert not nxt.unit(2).alive
    assert nxt.unit(2).pos == HexCoord(5, 2)
    assert nxt.winner == RED


# -- victory fixtures --------------------------------------------------------

def test_unit_on_point_wins():
    s = small_game(Unit(1, RED, HexCoord(5, 4)), Unit(2, BLUE, HexCoord(0, 10)))
    nxt = step(s, {1: Action.move(E)})
    assert nxt.unit(1).pos == CP
    assert nxt.winner == RED and nxt.over and not nxt.draw


def test_annihilation_wins():
    s = small_game(Unit(1, RED, HexCoord(0, 0)), Unit(2, BLUE, HexCoord(0, 1), alive=False))
    assert check_victory(s) == RED
    s = small_game(Unit(1, RED, HexCoord(0, 0), alive=False), Unit(2, BLUE, HexCoord(0, 1)))
    assert check_victory(s) == BLUE


def test_mutual_destruction_is_a_draw():
    s = small_game(Unit(1, RED, HexCoord(5, 1), hit_base=1.0), Unit(2, BLUE, HexCoord(5, 2), hit_base=1.0))
    nxt = step(s, {1: Action.shoot(2), 2: Action.shoot(1)})
    assert nxt.draw and nxt.winner is None


def test_simultaneous_arrival_bounces_both_and_play_continues():
    s = small_game(Unit(1, RED, HexCoord(5, 4)), Unit(2, BLUE, HexCoord(5, 6)))
    nxt = step(s, {1: Action.move(E), 2: Action.move(toward(HexCoord(5, 6), CP))})
    assert nxt.contested
    assert nxt.unit(1).pos == HexCoord(5, 4) and nxt.unit(2).pos == HexCoord(5, 6)
    assert nxt.winner is None and not nxt.draw and not nxt.over
    # next tick red arrives alone and takes it
    after = step(nxt, {1: Action.move(E), 2: HOLD})
    assert not after.contested and after.winner == RED


def test_max_ticks_is_a_draw():
    s = small_game(Unit(1, RED, HexCoord(0, 0)), Unit(2, BLUE, HexCoord(10, 10)), max_ticks=2)
    s = step(step(s, {}), {})
    assert s.draw and s.winner is None and s.tick == 2


def test_winner_never_changes_once_set():
    s = small_game(Unit(1, RED, HexCoord(5, 4)), Unit(2, BLUE, HexCoord(5, 7)))
    won = step(s, {1: Action.move(E)})
    assert won.winner == RED
    later = step(won, {1: Action.move(W), 2: Action.move(W)})
    assert later.winner == RED


# -- fog of war ---------------------------------------------------------------

def test_visibility_is_inclusive_and_excludes_dead():
    s = small_game(Unit(1, RED, HexCoord(5, 1)), Unit(2, BLUE, HexCoord(5, 5)), Unit(3, BLUE, HexCoord(5, 6)),
                   Unit(4, BLUE, HexCoord(4, 1), alive=False))
    seen = {r.observed_id for r in visible_units(s, s.unit(1))}
    assert seen == {1, 2}


def test_side_view_hides_unseen_enemies_and_rng():
    s = small_game(Unit(1, RED, HexCoord(0, 0)), Unit(2, BLUE, HexCoord(10, 10)), Unit(3, BLUE, HexCoord(1, 1)))
    view = side_view(s, RED)
    assert [u.id for u in view.enemies()] == [3]
    assert view.state.rng_state is None


def test_describe_unit_phrases(initial_state):
    s = small_game(Unit(1, RED, CP), Unit(2, BLUE, HexCoord(5, 6)), Unit(3, BLUE, HexCoord(0, 0)))
    assert describe_unit(s, s.unit(1)) == "red agent 1 is seizing the control point at hexagon 0505"
    assert "approaching the control point" in describe_unit(s, s.unit(2))
    assert describe_unit(s, s.unit(3)).endswith("at hexagon 0000")


# -- determinism and conservation -------------------------------------------

def random_rollout(state, seed, ticks=40):
    rng = random.Random(seed)
    digests = [state.digest()]
    for _ in range(ticks):
        if state.over:
            break
        orders = {u.id: rng.choice(legal_actions(state, u.id)) for u in state.living()}
        state = step(state, orders)
        digests.append(state.digest())
    return state, digests


def test_same_seed_same_trajectory(default_scenario):
    a = random_rollout(default_scenario.initial_state(3), 11)[1]
    b = random_rollout(default_scenario.initial_state(3), 11)[1]
    c = random_rollout(default_scenario.initial_state(4), 11)[1]
    assert a == b
    assert a != c


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_units_are_conserved_and_never_stack(default_scenario, game_seed, order_seed):
    state = default_scenario.initial_state(game_seed)
    final, _ = random_rollout(state, order_seed, ticks=25)
    assert {u.id for u in final.units} == {u.id for u in state.units}
    living = [u.pos for u in final.living()]
    assert len(living) == len(set(living))
    assert all(final.map.contains(p) for p in living)
