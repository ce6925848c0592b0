"""Monte Carlo episodes and parameter sweeps.

Episodes are simulated as a batch (one row per episode) but every row draws from
its own generator, so results do not depend on batch size or ordering. The
environment stream (occupancy, gains, sensing noise) is keyed by
``(master_seed, axis, point, episode)`` only, which gives every policy the same
realisation; a policy's private randomness is keyed additionally by its kind.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from statistics import NormalDist
from typing import Iterable, Optional, Sequence

import numpy as np

from rbaccess.belief import correct_busy, predict_busy
from rbaccess.dynamics import initial_state, next_busy, noisy_readings
from rbaccess.errors import ConfigurationError, SetupError, UsageError
from rbaccess.policies import ALL_POLICIES, Policy, PolicyKind, make_policy
from rbaccess.radio import NO_ACCESS, busy_rate, draw_power_gains, expected_rates, idle_rate, slot_weights
from rbaccess.solver import DEFAULT_MEMORY_CAP, PolicyTable, RateTable, backward_induction
from rbaccess.virtualization import PhysicalNetworkConfig, VirtualNetworkConfig, slice_network

log = logging.getLogger(__name__)

AXES = ("horizon", "rb_count", "false_obs")
RATE_SAMPLES = 100_000


def stable_seed(*parts) -> int:
    blob = "|".join(repr(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


def vn_rates(vn: VirtualNetworkConfig, seed: int, samples: int = RATE_SAMPLES) -> RateTable:
    idle, busy = expected_rates(vn.radio, vn.interferers_per_busy_rb, samples, seed)
    return RateTable.uniform(vn.rbs, idle, busy)


@dataclass(eq=False)
class EpisodeTrace:
    """Per-slot record of one episode; row k describes slot k."""

    policy: str
    seed: int
    policy_seed: int
    discount: float
    states: np.ndarray        # true occupancy the slot's reward was realised on
    beliefs: np.ndarray       # busy probabilities held when choosing the action
    actions: np.ndarray
    observations: np.ndarray
    rates: np.ndarray         # realised rate of every RB
    rewards: np.ndarray

    def __len__(self):
        return self.actions.size

    @property
    def total(self) -> float:
        total = 0.0
        for w, r in zip(slot_weights(len(self), self.discount), self.rewards):
            total += float(w) * float(r)
        return total

    def check(self):
        if np.any(self.rewards < 0):
            raise AssertionError("negative reward in trace")
        if np.any(self.rewards[self.actions == NO_ACCESS] != 0):
            raise AssertionError("no-access slot earned a reward")

    def to_json(self) -> str:
        return json.dumps({
            "policy": self.policy, "seed": self.seed, "policy_seed": self.policy_seed,
            "discount": self.discount,
            "slots": [{
                "state": self.states[k].tolist(), "belief": self.beliefs[k].tolist(),
                "action": int(self.actions[k]), "observation": self.observations[k].tolist(),
                "rates": self.rates[k].tolist(), "reward": float(self.rewards[k]),
            } for k in range(len(self))],
        }, sort_keys=True)


@dataclass(frozen=True)
class EpisodeDraws:
    init_busy: np.ndarray     # (n, R) int8
    u_trans: np.ndarray       # (n, K, R)
    own_gain: np.ndarray      # (n, K, R)
    occupant_gain: np.ndarray  # (n, K, R) summed over occupants
    u_obs: np.ndarray         # (n, K, R)


def draw_environment(vn: VirtualNetworkConfig, horizon: int, seeds: Sequence[int]) -> EpisodeDraws:
    rbs, m = vn.rbs, vn.interferers_per_busy_rb
    init, ut, own, occ, uo = [], [], [], [], []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        init.append(initial_state(vn.trans, rbs, rng).per_rb)
        ut.append(rng.random((horizon, rbs)))
        own.append(draw_power_gains(rng, (horizon, rbs)))
        occ.append(draw_power_gains(rng, (horizon, rbs, m)).sum(axis=2))
        uo.append(rng.random((horizon, rbs)))
    return EpisodeDraws(np.array(init), np.array(ut), np.array(own), np.array(occ), np.array(uo))


def draw_policy(kind: PolicyKind, rbs: int, horizon: int, seeds: Sequence[int]) -> np.ndarray:
    if kind is not PolicyKind.RANDOM_SELECTION:
        return np.zeros((len(seeds), horizon), dtype=np.int64)
    return np.array([np.random.default_rng(s).integers(1, rbs + 1, size=horizon) for s in seeds])


def simulate(vn: VirtualNetworkConfig, policy: Policy, horizon: int, env_seeds: Sequence[int],
             policy_seeds: Sequence[int], discount: float, record: bool = False):
    """Run a batch of episodes. Returns discounted totals, plus traces when ``record``."""
    if horizon < 1:
        raise UsageError("horizon must be at least one slot")
    n, rbs = len(env_seeds), vn.rbs
    env = draw_environment(vn, horizon, env_seeds)
    draws = draw_policy(policy.kind, rbs, horizon, policy_seeds)
    trans, obs_model = vn.trans, vn.obs_model
    rho, ups = obs_model.false_obs_accessed, obs_model.false_obs_idle_action
    cols = np.arange(1, rbs + 1)

    state = env.init_busy.astype(np.int8)
    belief = np.full((n, rbs), trans.stationary_busy)
    rewards = np.zeros((n, horizon))
    if record:
        log_state, log_belief, log_obs, log_rates = (np.zeros((n, horizon, rbs), dt)
                                                     for dt in (np.int8, float, np.int8, float))
        log_action = np.zeros((n, horizon), dtype=np.int64)
    rows = np.arange(n)
    for k in range(horizon):
        state = next_busy(state, env.u_trans[:, k], trans)
        own = env.own_gain[:, k]
        achievable = np.where(state == 1, busy_rate(own, env.occupant_gain[:, k], vn.radio),
                              idle_rate(own, vn.radio))
        action = np.asarray(policy.decide(k, belief, achievable, draws), dtype=np.int64)
        if np.any((action < 0) | (action > rbs)):
            raise UsageError("policy returned an action outside the action set")
        picked = achievable[rows, np.maximum(action, 1) - 1]
        rewards[:, k] = np.where(action == NO_ACCESS, 0.0, picked)
        eps = np.where(cols[None, :] == action[:, None], rho, ups)
        obs = noisy_readings(state, eps, env.u_obs[:, k])
        if record:
            log_state[:, k], log_belief[:, k], log_obs[:, k] = state, belief, obs
            log_rates[:, k], log_action[:, k] = achievable, action
        predicted = predict_busy(belief, trans)
        if policy.belief_mode == "predict":
            belief = np.clip(predicted, 0.0, 1.0)
        else:
            belief, _ = correct_busy(predicted, obs, eps)
    # slot-by-slot accumulation keeps every row's total independent of batch size
    totals = np.zeros(n)
    for k, w in enumerate(slot_weights(horizon, discount)):
        totals += w * rewards[:, k]
    if not record:
        return totals
    traces = [EpisodeTrace(policy.kind.value, int(env_seeds[i]), int(policy_seeds[i]), discount,
                           log_state[i], log_belief[i], log_action[i], log_obs[i], log_rates[i], rewards[i])
              for i in range(n)]
    return totals, traces


def solve_tables(vn: VirtualNetworkConfig, rates: RateTable, discount: float, horizon: int,
                 grid_resolution: Optional[int], kinds: Iterable[PolicyKind],
                 memory_cap: int = DEFAULT_MEMORY_CAP, cache: Optional[dict] = None,
                 table_hashes: Optional[dict] = None):
    """Closed- and open-loop tables needed by ``kinds`` (None where not needed).

    Newly solved tables are recorded in ``table_hashes`` as model hash -> content hash.
    """
    kinds = set(kinds)
    out = {}
    for observe, kind in ((True, PolicyKind.OPTIMAL_POMDP), (False, PolicyKind.NO_OBSERVATION)):
        if kind not in kinds:
            out[observe] = None
            continue
        obs_key = (vn.obs_model.false_obs_accessed, vn.obs_model.false_obs_idle_action) if observe else None
        key = (observe, vn.trans, obs_key, rates, discount, grid_resolution)
        table = None if cache is None else cache.get(key)
        if table is None or table.max_horizon < horizon:
            log.info("solving %s table: %d RBs, horizon %d", "closed-loop" if observe else "open-loop",
                     vn.rbs, horizon)
            table = backward_induction(vn.trans, vn.obs_model, rates, discount, horizon, grid_resolution,
                                       observe=observe, memory_cap=memory_cap)
            if cache is not None:
                cache[key] = table
            if table_hashes is not None:
                table_hashes[table.model_hash] = table.content_hash()
        out[observe] = table.truncated(horizon)
    return out[True], out[False]


def run_episode(vn: VirtualNetworkConfig, policy, horizon: int, seed: int, discount: float = 0.9,
                policy_seed: Optional[int] = None, closed_loop: Optional[PolicyTable] = None,
                open_loop: Optional[PolicyTable] = None) -> EpisodeTrace:
    """One fully recorded episode. ``policy`` is a Policy or a PolicyKind."""
    if not isinstance(policy, Policy):
        policy = make_policy(PolicyKind(policy), closed_loop, open_loop)
    if policy_seed is None:
        policy_seed = stable_seed(seed, policy.kind.value)
    _, traces = simulate(vn, policy, horizon, [seed], [policy_seed], discount, record=True)
    return traces[0]


def mean_ci(samples, confidence: float = 0.95):
    x = np.asarray(samples, dtype=float)
    mean = float(x.mean())
    if x.size < 2:
        return mean, mean, mean
    half = NormalDist().inv_cdf(0.5 + confidence / 2) * float(x.std(ddof=1)) / np.sqrt(x.size)
    return mean, mean - half, mean + half


def paired_ci(a, b, confidence: float = 0.95):
    """CI of mean(a - b) over shared realisations."""
    return mean_ci(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), confidence)


@dataclass(frozen=True)
class SummaryRow:
    axis_value: float
    policy: str
    mean_reward: float
    ci_low: float
    ci_high: float
    replications: int
    min_total: float
    max_total: float


@dataclass
class ExperimentSummary:
    axis: str
    rows: list
    confidence: float = 0.95
    totals: dict = field(default_factory=dict, repr=False)   # (axis_value, policy) -> totals
    metadata: dict = field(default_factory=dict)
    table_hashes: dict = field(default_factory=dict)

    @property
    def replications(self) -> int:
        return self.rows[0].replications if self.rows else 0

    def row(self, axis_value, policy) -> SummaryRow:
        policy = PolicyKind(policy).value
        for r in self.rows:
            if r.axis_value == axis_value and r.policy == policy:
                return r
        raise KeyError((axis_value, policy))

    def samples(self, axis_value, policy) -> np.ndarray:
        return self.totals[(axis_value, PolicyKind(policy).value)]


@dataclass(frozen=True)
class ExperimentBase:
    """Everything a sweep holds fixed."""

    physical: PhysicalNetworkConfig = field(default_factory=PhysicalNetworkConfig)
    focal_slice: int = 0
    discount: float = 0.9
    horizon: int = 20
    grid_resolution: Optional[int] = 21
    memory_cap: int = DEFAULT_MEMORY_CAP


def point_config(base: ExperimentBase, axis: str, point) -> tuple:
    """``(VirtualNetworkConfig, horizon)`` for one sweep point; validates before any work."""
    if axis not in AXES:
        raise UsageError(f"unknown axis {axis!r}; choose from {AXES}")
    phys, horizon, i = base.physical, base.horizon, base.focal_slice
    if not 0 <= i < len(phys.slices):
        raise ConfigurationError(f"focal slice {i + 1} does not exist", key="focal_slice")
    if axis == "horizon":
        horizon = int(point)
        if horizon != point or horizon < 1:
            raise ConfigurationError(f"horizon point {point} is not a positive integer", key="points")
    elif axis == "rb_count":
        rbs = int(point)
        if rbs != point or rbs < 1:
            raise ConfigurationError(f"RB-count point {point} is not a positive integer", key="points")
        s = phys.slices[i]
        phys = phys.with_slice(i, rbs=rbs, bandwidth_hz=s.bandwidth_hz / s.rbs * rbs)
    else:
        phys = phys.with_slice(i, rho=float(point), upsilon=float(point))
    return slice_network(phys)[i], horizon


def run_experiment(axis: str, points: Sequence, replications: int, policies: Iterable,
                   base: ExperimentBase, master_seed: int, cache: Optional[dict] = None) -> ExperimentSummary:
    if not points:
        raise UsageError("need at least one sweep point")
    if replications < 1:
        raise UsageError("need at least one replication")
    kinds = [k for k in ALL_POLICIES if k in {PolicyKind(p) for p in policies}]
    if not kinds:
        raise UsageError("need at least one policy")
    resolved = [point_config(base, axis, p) for p in points]
    cache = {} if cache is None else cache
    rate_seed = stable_seed(master_seed, "expected-rates")
    max_h = max(h for _, h in resolved)

    rows, totals, table_hashes = [], {}, {}
    for point, (vn, horizon) in zip(points, resolved):
        rates = vn_rates(vn, rate_seed)
        solve_h = max_h if axis == "horizon" else horizon
        closed, opened = solve_tables(vn, rates, base.discount, solve_h, base.grid_resolution, kinds,
                                      base.memory_cap, cache, table_hashes)
        if closed is not None:
            closed = closed.truncated(horizon)
        if opened is not None:
            opened = opened.truncated(horizon)
        env_seeds = [stable_seed(master_seed, axis, point, "env", i) for i in range(replications)]
        for kind in kinds:
            pol_seeds = [stable_seed(master_seed, axis, point, kind.value, i) for i in range(replications)]
            policy = make_policy(kind, closed, opened)
            t = simulate(vn, policy, horizon, env_seeds, pol_seeds, base.discount)
            mean, lo, hi = mean_ci(t)
            rows.append(SummaryRow(float(point), kind.value, mean, lo, hi, replications,
                                   float(t.min()), float(t.max())))
            totals[(float(point), kind.value)] = t
        if axis == "false_obs":
            for key in [k for k in cache if k[0]]:
                del cache[key]
        elif axis == "rb_count":
            cache.clear()
    meta = {"axis": axis, "points": [float(p) for p in points], "master_seed": master_seed,
            "focal_slice": base.focal_slice + 1, "discount": base.discount,
            "grid_resolution": base.grid_resolution}
    if axis == "horizon":
        meta["axis_note"] = "time period read as the horizon K in slots"
    summary = ExperimentSummary(axis, rows, 0.95, totals, meta)
    summary.table_hashes = dict(sorted(table_hashes.items()))
    return summary


def slice_averages(base: ExperimentBase, policies: Iterable, replications: int, master_seed: int) -> list:
    """Average per-slot rate C_l of every virtual network under each policy."""
    out = []
    rate_seed = stable_seed(master_seed, "expected-rates")
    kinds = [k for k in ALL_POLICIES if k in {PolicyKind(p) for p in policies}]
    for vn in slice_network(base.physical):
        rates = vn_rates(vn, rate_seed)
        closed, opened = solve_tables(vn, rates, base.discount, base.horizon, base.grid_resolution, kinds,
                                      base.memory_cap)
        env_seeds = [stable_seed(master_seed, "slice", vn.index, "env", i) for i in range(replications)]
        for kind in kinds:
            pol_seeds = [stable_seed(master_seed, "slice", vn.index, kind.value, i) for i in range(replications)]
            t = simulate(vn, make_policy(kind, closed, opened), base.horizon, env_seeds, pol_seeds, 1.0)
            out.append((vn.qos_class, kind.value, float(t.mean()) / base.horizon))
    return out
