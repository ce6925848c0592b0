"""Factored belief over RB occupancy and its Bayes update.

RBs evolve and are sensed independently, so the joint posterior is the product of
per-RB posteriors and a belief is one busy probability per RB.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rbaccess.dynamics import Observation, ObservationModel, TransitionModel
from rbaccess.errors import BeliefDegeneracyError, UsageError


@dataclass(frozen=True, eq=False)
class Belief:
    busy_prob: np.ndarray

    def __post_init__(self):
        b = np.array(self.busy_prob, dtype=float).reshape(-1)
        if b.size < 1:
            raise UsageError("belief needs at least one RB")
        if np.any(~np.isfinite(b)) or np.any(b < 0) or np.any(b > 1):
            raise UsageError("belief entries must lie in [0, 1]")
        b.setflags(write=False)
        object.__setattr__(self, "busy_prob", b)

    def __len__(self):
        return self.busy_prob.size

    def __eq__(self, other):
        return isinstance(other, Belief) and np.array_equal(self.busy_prob, other.busy_prob)


def predict_busy(b, trans: TransitionModel):
    return b * trans.p_busy_to_busy + (1.0 - b) * trans.p_idle_to_busy


def correct_busy(predicted, observed, flip_probs):
    """Posterior busy probability from predicted ones and readings.

    Returns ``(posterior, degenerate)``; degenerate entries keep the predicted value.
    """
    predicted = np.asarray(predicted, dtype=float)
    observed = np.asarray(observed)
    like_busy = np.where(observed == 1, 1.0 - flip_probs, flip_probs)
    like_idle = np.where(observed == 1, flip_probs, 1.0 - flip_probs)
    num = predicted * like_busy
    den = num + (1.0 - predicted) * like_idle
    degenerate = den <= 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        post = np.where(degenerate, predicted, num / np.where(degenerate, 1.0, den))
    return np.clip(post, 0.0, 1.0), degenerate


def initial_belief(model: TransitionModel, rbs: int) -> Belief:
    if rbs < 1:
        raise UsageError("need at least one RB")
    return Belief(np.full(rbs, model.stationary_busy))


def predict_belief(belief: Belief, trans: TransitionModel) -> Belief:
    return Belief(np.clip(predict_busy(belief.busy_prob, trans), 0.0, 1.0))


def update_belief(belief: Belief, action: int, obs: Observation, trans: TransitionModel,
                  obs_model: ObservationModel) -> Belief:
    """Predict through the chain, then condition on this slot's readings.

    Raises BeliefDegeneracyError (carrying the predicted belief) when an observation
    has zero likelihood.
    """
    if len(obs) != len(belief):
        raise UsageError(f"observation covers {len(obs)} RBs, belief {len(belief)}")
    predicted = predict_busy(belief.busy_prob, trans)
    eps = obs_model.flip_probs(action, len(belief))
    post, degenerate = correct_busy(predicted, obs.per_rb, eps)
    if np.any(degenerate):
        rbs = (np.flatnonzero(degenerate) + 1).tolist()
        raise BeliefDegeneracyError(f"zero-likelihood observation on RB(s) {rbs}",
                                    predicted=Belief(np.clip(predicted, 0.0, 1.0)))
    return Belief(post)
