import itertools

import numpy as np
import pytest

from oracles import best_strategy, open_loop_best
from rbaccess.belief import Belief
from rbaccess.dynamics import ObservationModel, TransitionModel
from rbaccess.errors import GridSizeError, UsageError
from rbaccess.radio import NO_ACCESS
from rbaccess.solver import (
    PolicyTable,
    RateTable,
    act,
    backward_induction,
    default_grid_resolution,
    expected_slot_reward,
)

CHAIN = TransitionModel(0.15, 0.9)


def grid_points(rbs, g, every=1):
    axis = np.linspace(0, 1, g)
    for idx in itertools.product(range(0, g, every), repeat=rbs):
        yield idx, [axis[i] for i in idx]


def test_expected_slot_reward():
    rates = RateTable((4.0,), (2.0,))
    assert expected_slot_reward(Belief([0.3]), NO_ACCESS, rates) == 0.0
    assert expected_slot_reward(Belief([0.0]), 1, rates) == 4.0
    assert expected_slot_reward(Belief([0.5]), 1, rates) == 3.0
    # belief propagated first when a chain is supplied: 1/7 stays 1/7
    got = expected_slot_reward(Belief([1 / 7]), 1, rates, CHAIN)
    assert got == pytest.approx(4 * 6 / 7 + 2 / 7)
    with pytest.raises(UsageError):
        expected_slot_reward(Belief([0.1, 0.2]), 1, rates)


def test_horizon_one_is_greedy():
    rates = RateTable((1.0, 3.0, 2.0), (0.5, 0.1, 0.2))
    table = backward_induction(CHAIN, ObservationModel(0.1, 0.1), rates, 0.9, 1, 5)
    for idx, b in grid_points(3, 5):
        q = [expected_slot_reward(Belief(b), a, rates, CHAIN) for a in range(4)]
        assert table.values[0][idx] == pytest.approx(max(q), rel=1e-14)
        assert table.actions[0][idx] == int(np.argmax(q))


def test_certain_idle_picks_fastest_rb():
    rates = RateTable((1.0, 5.0, 2.0), (0.0, 0.0, 0.0))
    t = backward_induction(TransitionModel(0.0, 1.0), ObservationModel(0.1, 0.1), rates, 0.9, 1, 3)
    assert act(t, 0, Belief([0.0, 0.0, 0.0])) == 2


def test_all_zero_rates_choose_no_access():
    rates = RateTable.uniform(2, 0.0, 0.0)
    t = backward_induction(CHAIN, ObservationModel(0.1, 0.1), rates, 0.9, 3, 5)
    assert np.all(t.actions == NO_ACCESS)
    assert act(t, 1, Belief([0.3, 0.3])) == NO_ACCESS


def test_equal_rates_tie_break_lowest_index():
    rates = RateTable.uniform(3, 2.0, 1.0)
    t = backward_induction(CHAIN, ObservationModel(0.5, 0.5), rates, 0.9, 2, 5)
    s = CHAIN.stationary_busy
    assert act(t, 0, Belief([s, s, s])) == 1


@pytest.mark.parametrize("horizon", [1, 2, 3])
def test_single_rb_matches_strategy_tree(horizon):
    rates = RateTable((1.0,), (0.1,))
    obs = ObservationModel(0.1, 0.3)
    table = backward_induction(CHAIN, obs, rates, 0.9, horizon, 11)
    for idx, b in grid_points(1, 11):
        value, root, _ = best_strategy(b, horizon, 0.15, 0.9, 0.1, 0.3, [1.0], [0.1], 0.9)
        assert table.values_at_slot(0)[idx] == pytest.approx(value, abs=1e-6)
        assert table.actions_at_slot(0)[idx] == root


def test_two_rbs_horizon_two_matches_strategy_tree():
    idle, busy = [1.0, 0.8], [0.1, 0.35]
    rates = RateTable(idle, busy)
    table = backward_induction(CHAIN, ObservationModel(0.1, 0.3), rates, 0.9, 2, 6)
    for idx, b in grid_points(2, 6, every=2):
        value, root, _ = best_strategy(b, 2, 0.15, 0.9, 0.1, 0.3, idle, busy, 0.9)
        assert table.values_at_slot(0)[idx] == pytest.approx(value, abs=1e-6)
        assert table.actions_at_slot(0)[idx] == root


def test_uninformative_readings_equal_open_loop():
    rates = RateTable((1.0, 0.7), (0.2, 0.4))
    half = ObservationModel(0.5, 0.5)
    closed = backward_induction(CHAIN, half, rates, 0.8, 5, 11)
    opened = backward_induction(CHAIN, half, rates, 0.8, 5, 11, observe=False)
    assert np.allclose(closed.values, opened.values, rtol=1e-12, atol=1e-12)
    assert np.array_equal(closed.actions, opened.actions)


@pytest.mark.parametrize("horizon", [1, 2, 3, 4])
def test_open_loop_single_rb_matches_best_sequence(horizon):
    opened = backward_induction(CHAIN, ObservationModel(0.1, 0.1), RateTable((1.0,), (0.2,)), 0.9, horizon,
                                11, observe=False)
    for idx, b in grid_points(1, 11, every=2):
        want = open_loop_best(b, horizon, 0.15, 0.9, [1.0], [0.2], 0.9)
        assert opened.values_at_slot(0)[idx] == pytest.approx(want, abs=1e-9)


def test_value_monotone_in_horizon():
    rates = RateTable((1.0, 0.6, 0.9), (0.1, 0.3, 0.0))
    beta = 0.85
    t = backward_induction(CHAIN, ObservationModel(0.1, 0.25), rates, beta, 6, 9)
    for n in range(1, 6):
        assert np.all(t.values[n] >= beta * t.values[n - 1] - 1e-12)


def test_truncation_equals_direct_solve():
    rates = RateTable((1.0, 0.6), (0.1, 0.3))
    obs = ObservationModel(0.2, 0.1)
    long = backward_induction(CHAIN, obs, rates, 0.9, 7, 9)
    short = backward_induction(CHAIN, obs, rates, 0.9, 4, 9)
    cut = long.truncated(4)
    for k in range(4):
        assert np.array_equal(cut.values_at_slot(k), short.values_at_slot(k))
        assert np.array_equal(cut.actions_at_slot(k), short.actions_at_slot(k))


def test_solve_is_deterministic(tmp_path):
    rates = RateTable((1.0, 0.6), (0.1, 0.3))
    a = backward_induction(CHAIN, ObservationModel(0.1, 0.2), rates, 0.9, 3, 7)
    b = backward_induction(CHAIN, ObservationModel(0.1, 0.2), rates, 0.9, 3, 7)
    assert a.to_bytes() == b.to_bytes()
    path = tmp_path / "t.rbpt"
    a.save(path)
    back = PolicyTable.load(path)
    assert back.content_hash() == a.content_hash()
    assert back.model_hash == a.model_hash
    assert np.array_equal(back.actions, a.actions)


def test_grid_refinement_converges():
    rates = RateTable((1.0, 0.8), (0.1, 0.3))
    obs = ObservationModel(0.1, 0.1)
    probes = [Belief([1 / 7, 1 / 7]), Belief([0.33, 0.61]), Belief([0.9, 0.05])]
    values = []
    for g in (6, 11, 21, 41, 81):
        t = backward_induction(CHAIN, obs, rates, 0.9, 5, g)
        values.append(np.array([t.value(0, b) for b in probes]))
    deltas = [np.max(np.abs(values[i + 1] - values[i])) for i in range(len(values) - 1)]
    assert all(d2 <= d1 + 1e-12 for d1, d2 in zip(deltas, deltas[1:]))
    assert np.all(np.abs(values[-1] - values[-2]) <= 0.01 * np.abs(values[-1]))


def test_interpolated_value_at_grid_points():
    t = backward_induction(CHAIN, ObservationModel(0.1, 0.1), RateTable((1.0, 0.8), (0.1, 0.3)), 0.9, 2, 5)
    assert t.value(0, Belief([0.25, 0.75])) == pytest.approx(t.values_at_slot(0)[1, 3])


def test_sizing_and_argument_errors():
    rates = RateTable.uniform(5, 1.0, 0.1)
    with pytest.raises(GridSizeError):
        backward_induction(CHAIN, ObservationModel(0.1, 0.1), rates, 0.9, 20, 21, memory_cap=2**20)
    with pytest.raises(UsageError):
        backward_induction(CHAIN, ObservationModel(0.1, 0.1), rates, 0.9, 0, 3)
    with pytest.raises(UsageError):
        backward_induction(CHAIN, ObservationModel(0.1, 0.1), rates, 0.9, 1, 1)
    t = backward_induction(CHAIN, ObservationModel(0.1, 0.1), RateTable((1.0,), (0.1,)), 0.9, 2, 3)
    with pytest.raises(UsageError):
        act(t, 2, Belief([0.2]))
    assert default_grid_resolution(2) == 101 and default_grid_resolution(5) == 21
