"""Finite-horizon dynamic programming over a discretised factored belief.

Beliefs live on the grid ``linspace(0, 1, G) ** R``. Because RBs are observed
independently and multilinear interpolation is a tensor product of 1-D linear
interpolations, the expectation of the next-slot value over all ``2**R`` readings is
a product of ``R`` small ``G x G`` operators, one per belief axis. Each slot of the
backward pass is therefore ``R`` matrix products per distinct observation pattern.

Layers are stored by slots-to-go, so a table solved for horizon ``K`` also answers
every shorter horizon (the weight of a slot depends only on how many slots follow it).
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from rbaccess.belief import Belief, predict_busy
from rbaccess.dynamics import ObservationModel, TransitionModel
from rbaccess.errors import GridSizeError, SetupError, UsageError
from rbaccess.radio import NO_ACCESS

FORMAT_MAGIC = b"RBPT"
FORMAT_VERSION = 1
DEFAULT_MEMORY_CAP = 3 * 2**30
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class RateTable:
    """Expected per-RB rates conditioned on the RB being idle / busy."""

    idle: tuple
    busy: tuple

    def __post_init__(self):
        idle = tuple(float(x) for x in self.idle)
        busy = tuple(float(x) for x in self.busy)
        if len(idle) != len(busy) or not idle:
            raise UsageError("idle and busy rate lists must be nonempty and equally long")
        if min(idle + busy) < 0:
            raise UsageError("expected rates must be nonnegative")
        object.__setattr__(self, "idle", idle)
        object.__setattr__(self, "busy", busy)

    @classmethod
    def uniform(cls, rbs, idle, busy):
        return cls((idle,) * rbs, (busy,) * rbs)

    def __len__(self):
        return len(self.idle)


def default_grid_resolution(rbs: int) -> int:
    return 101 if rbs <= 2 else 21


def expected_slot_reward(belief, action: int, rates: RateTable,
                         trans: Optional[TransitionModel] = None) -> float:
    """Expected immediate rate of ``action``.

    With ``trans`` the belief is first propagated one slot; without it the belief is
    taken to be the predicted one already.
    """
    b = belief.busy_prob if isinstance(belief, Belief) else np.asarray(belief, dtype=float)
    if b.size != len(rates):
        raise UsageError(f"belief covers {b.size} RBs, rate table {len(rates)}")
    if action == NO_ACCESS:
        return 0.0
    if not 1 <= action <= b.size:
        raise UsageError(f"action RB_{action} out of range for {b.size} RBs")
    p = float(b[action - 1])
    if trans is not None:
        p = float(predict_busy(p, trans))
    return (1.0 - p) * rates.idle[action - 1] + p * rates.busy[action - 1]


def _interp_rows(u, grid_resolution):
    """Linear-interpolation matrix mapping grid values to values at points ``u``."""
    g = grid_resolution
    pos = np.clip(np.asarray(u, dtype=float), 0.0, 1.0) * (g - 1)
    lo = np.minimum(np.floor(pos).astype(int), g - 2)
    frac = pos - lo
    rows = np.zeros((pos.size, g))
    idx = np.arange(pos.size)
    rows[idx, lo] += 1.0 - frac
    rows[idx, lo + 1] += frac
    return rows


def _reading_branches(grid, trans, eps, observe):
    """Per-axis branches ``(prob, posterior)`` for readings busy/idle, each shaped (G, 2)."""
    p = predict_busy(grid, trans)
    if not observe:
        return np.stack([np.ones_like(p), np.zeros_like(p)], axis=1), np.stack([p, p], axis=1)
    p_busy = (1.0 - eps) * p + eps * (1.0 - p)
    p_idle = eps * p + (1.0 - eps) * (1.0 - p)
    with np.errstate(invalid="ignore", divide="ignore"):
        u_busy = np.where(p_busy > 0, (1.0 - eps) * p / np.where(p_busy > 0, p_busy, 1.0), p)
        u_idle = np.where(p_idle > 0, eps * p / np.where(p_idle > 0, p_idle, 1.0), p)
    return np.stack([p_busy, p_idle], axis=1), np.stack([u_busy, u_idle], axis=1)


def _axis_operator(grid, trans, eps, observe):
    probs, post = _reading_branches(grid, trans, eps, observe)
    g = grid.size
    op = probs[:, :1] * _interp_rows(post[:, 0], g) + probs[:, 1:] * _interp_rows(post[:, 1], g)
    return op


def _apply_axis(tensor, op, axis):
    out = np.tensordot(op, tensor, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def _axis_reward(grid, trans, rates, r):
    p = predict_busy(grid, trans)
    return (1.0 - p) * rates.idle[r] + p * rates.busy[r]


def _broadcast_axis(vec, axis, ndim):
    shape = [1] * ndim
    shape[axis] = vec.size
    return vec.reshape(shape)


def _khatri_rao(mats):
    out = mats[0]
    for m in mats[1:]:
        out = (out[:, None, :] * m[None, :, :]).reshape(-1, m.shape[1])
    return out


def _expected_max(values, probs, grid_resolution):
    """``E[max(0, X_1..X_R)]`` at every grid point for independent two-point X_r.

    ``values[r]``/``probs[r]`` are (G, 2) arrays: the support of X_r and its masses as a
    function of the belief on axis r. Uses ``E[M] = t_J - sum_j dt_j prod_r F_r(t_j)``
    over the sorted union of all support points, so the grid tensor is a sum of
    rank-1 terms and reduces to one matrix product.
    """
    rbs = len(values)
    g = grid_resolution
    cuts = np.unique(np.concatenate([np.zeros(1)] + [np.ravel(v) for v in values]))
    if cuts.size == 1:
        return np.zeros((g,) * rbs)
    dt = np.diff(cuts)
    t = cuts[:-1]
    # cdf[r][i, j] = P(X_r <= t_j) with X_r's distribution at grid index i
    cdf = [(probs[r][:, :, None] * (values[r][:, :, None] <= t[None, None, :])).sum(axis=1)
           for r in range(rbs)]
    half = (rbs + 1) // 2
    left = _khatri_rao(cdf[:half])
    if half == rbs:
        acc = left @ dt
    else:
        acc = left @ (_khatri_rao(cdf[half:]) * dt).T
    return (cuts[-1] - acc).reshape((g,) * rbs)


def _select(q_values):
    """Max over actions with lowest-index tie-breaking within a relative tolerance."""
    stacked = np.stack(q_values)
    best = stacked.max(axis=0)
    tol = TIE_RTOL * (np.abs(best) + 1.0)
    action = np.argmax(stacked >= best - tol, axis=0).astype(np.int8)
    return best, action


def model_hash(trans, obs_model, rates, discount, max_horizon, grid_resolution, observe,
               exact_terminal) -> str:
    payload = {
        "format_version": FORMAT_VERSION,
        "trans": [trans.p_idle_to_busy, trans.p_busy_to_idle],
        "obs": [obs_model.false_obs_accessed, obs_model.false_obs_idle_action] if observe else None,
        "rates_idle": list(rates.idle),
        "rates_busy": list(rates.busy),
        "discount": discount,
        "max_horizon": max_horizon,
        "grid_resolution": grid_resolution,
        "observe": observe,
        "exact_terminal": exact_terminal,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True, eq=False)
class PolicyTable:
    """Optimal values and actions on the belief grid.

    ``values[n - 1]`` and ``actions[n - 1]`` hold the layer with ``n`` slots to go.
    ``horizon`` selects which layers answer slot queries: slot ``k`` reads layer
    ``horizon - k``.
    """

    grid_resolution: int
    rbs: int
    discount: float
    values: np.ndarray
    actions: np.ndarray
    horizon: int
    model_hash: str
    observe: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.horizon <= self.values.shape[0]:
            raise UsageError(f"horizon {self.horizon} not covered by {self.values.shape[0]} layers")

    @property
    def max_horizon(self) -> int:
        return self.values.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_resolution)

    def truncated(self, horizon: int) -> "PolicyTable":
        """Same solution viewed as a shorter-horizon table (arrays are shared)."""
        return PolicyTable(self.grid_resolution, self.rbs, self.discount, self.values,
                           self.actions, horizon, self.model_hash, self.observe, dict(self.meta))

    def _layer(self, slot):
        if not 0 <= slot < self.horizon:
            raise UsageError(f"slot {slot} outside [0, {self.horizon})")
        return self.horizon - slot - 1

    def values_at_slot(self, slot: int) -> np.ndarray:
        return self.values[self._layer(slot)]

    def actions_at_slot(self, slot: int) -> np.ndarray:
        return self.actions[self._layer(slot)]

    def nearest_index(self, busy_prob):
        b = np.asarray(busy_prob, dtype=float)
        return np.rint(np.clip(b, 0.0, 1.0) * (self.grid_resolution - 1)).astype(np.intp)

    def act_batch(self, slot: int, busy_prob: np.ndarray) -> np.ndarray:
        """Actions for a ``(n, R)`` batch of beliefs."""
        idx = self.nearest_index(busy_prob)
        if idx.shape[-1] != self.rbs:
            raise UsageError(f"belief covers {idx.shape[-1]} RBs, table {self.rbs}")
        layer = self.actions[self._layer(slot)]
        return layer[tuple(idx[..., r] for r in range(self.rbs))].astype(np.int64)

    def value(self, slot: int, belief) -> float:
        """Multilinear interpolation of the slot value at an arbitrary belief."""
        b = belief.busy_prob if isinstance(belief, Belief) else np.asarray(belief, dtype=float)
        layer = self.values[self._layer(slot)]
        pos = np.clip(b, 0.0, 1.0) * (self.grid_resolution - 1)
        lo = np.minimum(np.floor(pos).astype(int), self.grid_resolution - 2)
        frac = pos - lo
        total = 0.0
        for corner in np.ndindex(*(2,) * self.rbs):
            c = np.array(corner)
            w = np.prod(np.where(c == 1, frac, 1.0 - frac))
            if w:
                total += w * layer[tuple(lo + c)]
        return float(total)

    # serialisation

    def header(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model_hash": self.model_hash,
            "rbs": self.rbs,
            "grid_resolution": self.grid_resolution,
            "max_horizon": self.max_horizon,
            "horizon": self.horizon,
            "discount": self.discount,
            "observe": self.observe,
            "values_dtype": "<f8",
            "actions_dtype": "|i1",
            "meta": self.meta,
        }

    def _chunks(self):
        head = json.dumps(self.header(), sort_keys=True).encode("utf-8")
        yield FORMAT_MAGIC + struct.pack("<II", FORMAT_VERSION, len(head)) + head
        yield memoryview(np.ascontiguousarray(self.values, dtype="<f8")).cast("B")
        yield memoryview(np.ascontiguousarray(self.actions, dtype="|i1")).cast("B")

    def to_bytes(self) -> bytes:
        return b"".join(bytes(c) for c in self._chunks())

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for chunk in self._chunks():
            h.update(chunk)
        return h.hexdigest()

    def save(self, path) -> None:
        tmp = f"{path}.tmp"
        with open(tmp, "wb") as fh:
            for chunk in self._chunks():
                fh.write(chunk)
        os.replace(tmp, path)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PolicyTable":
        if data[:4] != FORMAT_MAGIC:
            raise SetupError("not a policy table file")
        version, head_len = struct.unpack("<II", data[4:12])
        if version != FORMAT_VERSION:
            raise SetupError(f"unsupported policy table version {version}")
        head = json.loads(data[12:12 + head_len].decode("utf-8"))
        g, rbs, kmax = head["grid_resolution"], head["rbs"], head["max_horizon"]
        shape = (kmax,) + (g,) * rbs
        count = int(np.prod(shape))
        offset = 12 + head_len
        values = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        actions = np.frombuffer(data, dtype="|i1", count=count, offset=offset + 8 * count).reshape(shape)
        return cls(g, rbs, head["discount"], values, actions, head["horizon"], head["model_hash"],
                   head["observe"], head.get("meta", {}))

    @classmethod
    def load(cls, path) -> "PolicyTable":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def grid_bytes(rbs, grid_resolution, horizon) -> int:
    points = grid_resolution ** rbs
    layers = points * horizon * 9
    working = points * 8 * (rbs + 6)
    return layers + working


def backward_induction(trans: TransitionModel, obs_model: ObservationModel, rates: RateTable,
                       discount: float, horizon: int, grid_resolution: Optional[int] = None,
                       observe: bool = True, exact_terminal: bool = True,
                       memory_cap: int = DEFAULT_MEMORY_CAP) -> PolicyTable:
    """Solve the belief MDP by backward induction over ``horizon`` slots.

    ``observe=False`` gives the open-loop problem where the belief only propagates
    through the chain. With ``exact_terminal`` the expectation of the last-slot value
    (a max of affine functions) is computed in closed form instead of interpolated.
    """
    rbs = len(rates)
    if horizon < 1:
        raise UsageError("horizon must be at least one slot")
    if not 0.0 <= discount <= 1.0:
        raise UsageError("discount outside [0, 1]")
    g = default_grid_resolution(rbs) if grid_resolution is None else int(grid_resolution)
    if g < 2:
        raise UsageError("grid needs at least two points per axis")
    need = grid_bytes(rbs, g, horizon)
    if need > memory_cap:
        raise GridSizeError(f"belief grid {g}^{rbs} over {horizon} slots needs ~{need / 2**20:.0f} MiB, "
                            f"cap is {memory_cap / 2**20:.0f} MiB")

    grid = np.linspace(0.0, 1.0, g)
    shape = (g,) * rbs
    rho, ups = obs_model.false_obs_accessed, obs_model.false_obs_idle_action
    # observation-quality pattern per action: axis a uses rho when action a is taken
    patterns = {}
    if not observe:
        patterns[(ups,) * rbs] = list(range(rbs + 1))
    for a in range(rbs + 1 if observe else 0):
        key = tuple(rho if a == r + 1 else ups for r in range(rbs))
        patterns.setdefault(key, []).append(a)

    rewards = [_axis_reward(grid, trans, rates, r) for r in range(rbs)]
    values = np.empty((horizon,) + shape)
    actions = np.empty((horizon,) + shape, dtype=np.int8)

    def immediate(a, weight):
        if a == NO_ACCESS:
            return np.zeros(shape)
        return np.broadcast_to(weight * _broadcast_axis(rewards[a - 1], a - 1, rbs), shape)

    best, act = _select([immediate(a, 1.0) for a in range(rbs + 1)])
    values[0], actions[0] = best, act

    operators = {}
    for togo in range(2, horizon + 1):
        weight = discount ** (togo - 1)
        future = {}
        for key, acts in patterns.items():
            if togo == 2 and exact_terminal:
                vals, probs = [], []
                for r in range(rbs):
                    pr, post = _reading_branches(grid, trans, key[r], observe)
                    vals.append(np.stack([_axis_reward(post[:, j], trans, rates, r) for j in (0, 1)], axis=1))
                    probs.append(pr)
                f = _expected_max(vals, probs, g)
            else:
                f = values[togo - 2]
                for r in range(rbs):
                    if (key[r], observe) not in operators:
                        operators[(key[r], observe)] = _axis_operator(grid, trans, key[r], observe)
                    f = _apply_axis(f, operators[(key[r], observe)], r)
                f = np.ascontiguousarray(f)
            for a in acts:
                future[a] = f
        q = [immediate(a, weight) + future[a] for a in range(rbs + 1)]
        best, act = _select(q)
        values[togo - 1], actions[togo - 1] = best, act

    digest = model_hash(trans, obs_model, rates, discount, horizon, g, observe, exact_terminal)
    meta = {"exact_terminal": exact_terminal,
            "trans": [trans.p_idle_to_busy, trans.p_busy_to_idle],
            "obs": [rho, ups],
            "rates_idle": list(rates.idle), "rates_busy": list(rates.busy)}
    return PolicyTable(g, rbs, float(discount), values, actions, horizon, digest, observe, meta)


def act(policy: PolicyTable, slot: int, belief) -> int:
    """Stored maximising action at the grid point nearest to ``belief``."""
    b = belief.busy_prob if isinstance(belief, Belief) else np.asarray(belief, dtype=float)
    return int(policy.act_batch(slot, b.reshape(1, -1))[0])
