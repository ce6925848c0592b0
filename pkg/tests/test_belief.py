import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import joint_filter
from rbaccess.belief import Belief, initial_belief, predict_belief, update_belief
from rbaccess.dynamics import Observation, ObservationModel, TransitionModel
from rbaccess.errors import BeliefDegeneracyError, UsageError
from rbaccess.radio import NO_ACCESS

probs = st.floats(0.0, 1.0)


def test_initial_belief(chain):
    assert np.allclose(initial_belief(chain, 5).busy_prob, 1 / 7, atol=1e-15)
    assert initial_belief(TransitionModel(0.3, 0.3), 2).busy_prob.tolist() == [0.5, 0.5]
    assert initial_belief(TransitionModel(0.0, 1.0), 3).busy_prob.tolist() == [0.0, 0.0, 0.0]
    assert initial_belief(TransitionModel(0.0, 0.0), 1).busy_prob.tolist() == [0.5]


def test_predict_examples(chain):
    b = Belief([0.2, 0.7])
    assert predict_belief(b, TransitionModel(0.0, 0.0)) == b
    assert predict_belief(Belief([1 / 7]), chain).busy_prob[0] == pytest.approx(1 / 7, abs=1e-12)
    assert predict_belief(Belief([1.0]), chain).busy_prob[0] == pytest.approx(0.1)


@given(probs, probs)
def test_stationary_is_fixed_point(ib, bi):
    m = TransitionModel(ib, bi)
    b = initial_belief(m, 1)
    if ib + bi > 0:
        assert predict_belief(b, m).busy_prob[0] == pytest.approx(b.busy_prob[0], abs=1e-12)


def test_perfect_sensing_pins_state(chain):
    post = update_belief(Belief([0.4, 0.6]), 1, Observation([0, 1]), chain, ObservationModel(0.0, 0.0))
    assert post.busy_prob.tolist() == [0.0, 1.0]


def test_uninformative_sensing_equals_prediction(chain):
    b = Belief([0.4, 0.05, 0.9])
    post = update_belief(b, 2, Observation([1, 0, 1]), chain, ObservationModel(0.5, 0.5))
    assert np.array_equal(post.busy_prob, predict_belief(b, chain).busy_prob)


def test_hand_evaluated_posterior(chain):
    b_pred = (1 / 7) * 0.1 + (6 / 7) * 0.15
    want = 0.9 * b_pred / (0.9 * b_pred + 0.1 * (1 - b_pred))
    assert want == pytest.approx(0.6, abs=1e-12)
    post = update_belief(Belief([1 / 7]), 1, Observation([1]), chain, ObservationModel(0.1, 0.1))
    assert post.busy_prob[0] == pytest.approx(want, abs=1e-12)
    assert joint_filter([1 / 7], [1], [[1]], 0.15, 0.9, 0.1, 0.1)[0][0] == pytest.approx(want, abs=1e-12)


def test_degenerate_observation_reports_prediction():
    m = TransitionModel(0.0, 1.0)      # every RB idle next slot
    with pytest.raises(BeliefDegeneracyError) as info:
        update_belief(Belief([0.3]), 1, Observation([1]), m, ObservationModel(0.0, 0.0))
    assert info.value.predicted.busy_prob.tolist() == [0.0]


def test_length_mismatch(chain, obs_01):
    with pytest.raises(UsageError):
        update_belief(Belief([0.1, 0.2]), 1, Observation([1]), chain, obs_01)


@st.composite
def filter_cases(draw):
    rbs = draw(st.integers(1, 3))
    horizon = draw(st.integers(1, 4))
    eps = st.floats(0.01, 0.99)
    model = (draw(st.floats(0.0, 1.0)), draw(st.floats(0.0, 1.0)), draw(eps), draw(eps))
    prior = [draw(st.floats(0.0, 1.0)) for _ in range(rbs)]
    actions = [draw(st.integers(0, rbs)) for _ in range(horizon)]
    readings = [[draw(st.integers(0, 1)) for _ in range(rbs)] for _ in range(horizon)]
    return prior, actions, readings, model


@settings(max_examples=200, deadline=None)
@given(filter_cases())
def test_factored_matches_joint_filter(case):
    prior, actions, readings, (ib, bi, rho, ups) = case
    trans, obs = TransitionModel(ib, bi), ObservationModel(rho, ups)
    want = joint_filter(prior, actions, readings, ib, bi, rho, ups)
    b = Belief(prior)
    for a, th, w in zip(actions, readings, want):
        b = update_belief(b, a, Observation(th), trans, obs)
        assert np.max(np.abs(b.busy_prob - np.array(w))) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.lists(st.integers(0, 1), min_size=2, max_size=2)),
                min_size=1, max_size=30),
       probs, probs, st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_entries_stay_in_unit_interval(steps, ib, bi, rho, ups):
    trans, obs = TransitionModel(ib, bi), ObservationModel(rho, ups)
    b = initial_belief(trans, 2)
    for a, th in steps:
        b = update_belief(b, a, Observation(th), trans, obs)
        assert np.all((b.busy_prob >= 0) & (b.busy_prob <= 1))


@given(probs, probs, st.lists(probs, min_size=1, max_size=4), st.integers(0, 1))
def test_half_flip_leaves_prediction(ib, bi, prior, reading):
    trans = TransitionModel(ib, bi)
    b = Belief(prior)
    post = update_belief(b, NO_ACCESS, Observation([reading] * len(prior)), trans, ObservationModel(0.5, 0.5))
    assert np.allclose(post.busy_prob, predict_belief(b, trans).busy_prob, rtol=1e-12, atol=1e-15)
