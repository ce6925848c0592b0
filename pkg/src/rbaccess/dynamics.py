"""Two-state Markov occupancy of each RB and the noisy sensing channel."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np

from rbaccess.errors import ConfigurationError, UsageError
from rbaccess.radio import NO_ACCESS


class RbState(IntEnum):
    IDLE = 0
    BUSY = 1


def _frozen_bits(values, name) -> np.ndarray:
    arr = np.array(values, dtype=np.int8).reshape(-1)
    if arr.size < 1:
        raise UsageError(f"{name} needs at least one RB")
    if np.any((arr != 0) & (arr != 1)):
        raise UsageError(f"{name} entries must be 0 (idle) or 1 (busy)")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SystemState:
    per_rb: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "per_rb", _frozen_bits(self.per_rb, "state"))

    def __len__(self):
        return self.per_rb.size

    def __eq__(self, other):
        return isinstance(other, SystemState) and np.array_equal(self.per_rb, other.per_rb)


@dataclass(frozen=True, eq=False)
class Observation:
    per_rb: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "per_rb", _frozen_bits(self.per_rb, "observation"))

    def __len__(self):
        return self.per_rb.size

    def __eq__(self, other):
        return isinstance(other, Observation) and np.array_equal(self.per_rb, other.per_rb)


def _check_prob(value, key):
    if not 0.0 <= value <= 1.0:
        raise ConfigurationError(f"probability {value} outside [0, 1]", key=key)


@dataclass(frozen=True)
class TransitionModel:
    p_idle_to_busy: float
    p_busy_to_idle: float
    poisson_rate: Optional[float] = None

    def __post_init__(self):
        _check_prob(self.p_idle_to_busy, "p_idle_busy")
        _check_prob(self.p_busy_to_idle, "p_busy_idle")
        if self.poisson_rate is not None and not self.poisson_rate >= 0:
            raise ConfigurationError("Poisson rate must be nonnegative", key="poisson_rate")

    @classmethod
    def from_matrix(cls, p_idle_idle, p_idle_busy, p_busy_idle, p_busy_busy, poisson_rate=None):
        for name, row in (("idle", (p_idle_idle, p_idle_busy)), ("busy", (p_busy_idle, p_busy_busy))):
            for v, key in zip(row, (f"p_{name}_idle", f"p_{name}_busy")):
                _check_prob(v, key)
            if abs(sum(row) - 1.0) > 1e-9:
                raise ConfigurationError(f"outgoing probabilities of the {name} state sum to {sum(row)}",
                                         key=f"p_{name}_*")
        return cls(p_idle_busy, p_busy_idle, poisson_rate)

    @property
    def p_busy_to_busy(self) -> float:
        return 1.0 - self.p_busy_to_idle

    @property
    def matrix(self) -> np.ndarray:
        """Row-stochastic 2x2 matrix, rows/cols ordered (idle, busy)."""
        return np.array([[1.0 - self.p_idle_to_busy, self.p_idle_to_busy],
                         [self.p_busy_to_idle, 1.0 - self.p_busy_to_idle]])

    @property
    def stationary_busy(self) -> float:
        total = self.p_idle_to_busy + self.p_busy_to_idle
        if total == 0.0:
            return 0.5
        return self.p_idle_to_busy / total


@dataclass(frozen=True)
class ObservationModel:
    """Flip probabilities of a reading: ``rho`` on the accessed RB, ``upsilon`` elsewhere."""

    false_obs_accessed: float
    false_obs_idle_action: float

    def __post_init__(self):
        _check_prob(self.false_obs_accessed, "rho")
        _check_prob(self.false_obs_idle_action, "upsilon")

    @property
    def symmetric(self) -> bool:
        return self.false_obs_accessed == self.false_obs_idle_action

    def flip_probs(self, action: int, rbs: int) -> np.ndarray:
        eps = np.full(rbs, self.false_obs_idle_action)
        if action != NO_ACCESS:
            eps[action - 1] = self.false_obs_accessed
        return eps


def transition_prob(model: TransitionModel, from_state: int, to_state: int) -> float:
    return float(model.matrix[int(from_state), int(to_state)])


def poisson_pmf(rate: float, count: int) -> float:
    if rate < 0 or count < 0 or int(count) != count:
        raise UsageError("Poisson pmf needs rate >= 0 and an integer count >= 0")
    count = int(count)
    if rate == 0:
        return 1.0 if count == 0 else 0.0
    return math.exp(count * math.log(rate) - rate - math.lgamma(count + 1))


def next_busy(states: np.ndarray, uniforms: np.ndarray, model: TransitionModel) -> np.ndarray:
    """Vectorised chain step driven by uniforms in [0, 1)."""
    p_busy = np.where(states == 1, model.p_busy_to_busy, model.p_idle_to_busy)
    return (uniforms < p_busy).astype(np.int8)


def step_state(state: SystemState, model: TransitionModel, rng: np.random.Generator) -> SystemState:
    u = rng.random(len(state))
    return SystemState(next_busy(state.per_rb, u, model))


def initial_state(model: TransitionModel, rbs: int, rng: np.random.Generator) -> SystemState:
    """Draw a starting occupancy.

    Each RB is busy with the stationary probability, unless the model carries a Poisson
    rate, in which case that many RBs (capped at ``rbs``) are marked busy at random.
    """
    if model.poisson_rate is None:
        return SystemState((rng.random(rbs) < model.stationary_busy).astype(np.int8))
    k = min(int(rng.poisson(model.poisson_rate)), rbs)
    busy = np.zeros(rbs, dtype=np.int8)
    busy[rng.choice(rbs, size=k, replace=False)] = 1
    return SystemState(busy)


def observation_prob(obs_model: ObservationModel, action: int, next_rb_state: int,
                     observed: int, rb: int) -> float:
    """Likelihood of reading ``observed`` on 1-based RB ``rb`` given its true next state."""
    if rb < 1:
        raise UsageError("RB indices are 1-based")
    eps = obs_model.false_obs_accessed if action == rb else obs_model.false_obs_idle_action
    return 1.0 - eps if int(observed) == int(next_rb_state) else eps


def noisy_readings(states: np.ndarray, flip_probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    flips = uniforms < flip_probs
    return (states.astype(bool) ^ flips).astype(np.int8)


def sense(state: SystemState, action: int, obs_model: ObservationModel,
          rng: np.random.Generator) -> Observation:
    eps = obs_model.flip_probs(action, len(state))
    return Observation(noisy_readings(state.per_rb, eps, rng.random(len(state))))
