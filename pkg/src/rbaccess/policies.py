"""Access policies: the belief-optimal one and the three comparison schemes.

Every policy exposes ``decide(slot, belief, achievable, draws)`` over a batch of
episodes. Each uses only its own information: the Bayes belief (optimal), the
prediction-only belief (no observation), nothing (random), or the realised slot
rates (perfect knowledge).
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from rbaccess.belief import Belief
from rbaccess.dynamics import SystemState
from rbaccess.errors import SetupError, UsageError
from rbaccess.radio import NO_ACCESS, ChannelGains, RbRadioParams, rb_rate
from rbaccess.solver import PolicyTable, RateTable, act


class PolicyKind(str, Enum):
    OPTIMAL_POMDP = "optimal_pomdp"
    RANDOM_SELECTION = "random_selection"
    NO_OBSERVATION = "no_observation"
    PERFECT_KNOWLEDGE = "perfect_knowledge"

    @classmethod
    def parse(cls, name: str) -> "PolicyKind":
        try:
            return cls(name.strip())
        except ValueError:
            raise UsageError(f"unknown policy {name!r}; choose from {[k.value for k in cls]}") from None


ALL_POLICIES = tuple(PolicyKind)


def random_policy(rbs: int, rng: np.random.Generator) -> int:
    if rbs < 1:
        raise UsageError("need at least one RB")
    return int(rng.integers(1, rbs + 1))


def no_observation_policy(slot: int, belief: Belief, rates: RateTable,
                          policy_table_open_loop: PolicyTable) -> int:
    if policy_table_open_loop.observe:
        raise SetupError("the no-observation scheme needs an open-loop table")
    if len(belief) != len(rates):
        raise UsageError("belief and rate table disagree on the RB count")
    return act(policy_table_open_loop, slot, belief)


def best_realized(achievable: np.ndarray) -> np.ndarray:
    """Per row: 1-based index of the largest rate, or no access when every rate is zero."""
    achievable = np.atleast_2d(achievable)
    choice = np.argmax(achievable, axis=1) + 1
    return np.where(achievable.max(axis=1) > 0, choice, NO_ACCESS)


def perfect_knowledge_policy(true_state: SystemState, gains: ChannelGains, params: RbRadioParams) -> int:
    """Greedy choice on the realised rates.

    Row 0 of ``gains`` is the focal MTCD; rows 1.. are the exogenous occupants that make
    an RB busy.
    """
    n_mtcd, n_rb = gains.shape
    if n_rb != len(true_state):
        raise UsageError("gain matrix and state disagree on the RB count")
    occupants = list(range(1, n_mtcd))
    rates = [rb_rate(0, r, s, gains, params, occupants if s else ()) for r, s in enumerate(true_state.per_rb)]
    return int(best_realized(np.array([rates]))[0])


class Policy:
    kind: PolicyKind
    belief_mode = "bayes"

    def decide(self, slot, belief, achievable, draws):
        raise NotImplementedError


class OptimalPolicy(Policy):
    kind = PolicyKind.OPTIMAL_POMDP

    def __init__(self, table: PolicyTable):
        if table is None:
            raise SetupError("optimal policy needs a solved policy table")
        if not table.observe:
            raise SetupError("optimal policy needs a closed-loop table")
        self.table = table

    def decide(self, slot, belief, achievable, draws):
        return self.table.act_batch(slot, belief)


class NoObservationPolicy(Policy):
    kind = PolicyKind.NO_OBSERVATION
    belief_mode = "predict"

    def __init__(self, table: PolicyTable):
        if table is None:
            raise SetupError("no-observation policy needs an open-loop policy table")
        if table.observe:
            raise SetupError("no-observation policy needs an open-loop table")
        self.table = table

    def decide(self, slot, belief, achievable, draws):
        return self.table.act_batch(slot, belief)


class RandomPolicy(Policy):
    kind = PolicyKind.RANDOM_SELECTION

    def decide(self, slot, belief, achievable, draws):
        return draws[:, slot]


class PerfectKnowledgePolicy(Policy):
    kind = PolicyKind.PERFECT_KNOWLEDGE

    def decide(self, slot, belief, achievable, draws):
        return best_realized(achievable)


def make_policy(kind: PolicyKind, closed_loop=None, open_loop=None) -> Policy:
    kind = PolicyKind(kind)
    if kind is PolicyKind.OPTIMAL_POMDP:
        return OptimalPolicy(closed_loop)
    if kind is PolicyKind.NO_OBSERVATION:
        return NoObservationPolicy(open_loop)
    if kind is PolicyKind.RANDOM_SELECTION:
        return RandomPolicy()
    return PerfectKnowledgePolicy()
