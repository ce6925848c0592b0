"""Physical-layer quantities, the per-slot rate model, and reward accumulation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from rbaccess.errors import ConfigurationError, UsageError

NO_ACCESS = 0
THERMAL_NOISE_DBM_PER_HZ = -174.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def thermal_noise_watts(bandwidth_hz: float, density_dbm_hz: float = THERMAL_NOISE_DBM_PER_HZ) -> float:
    return dbm_to_watts(density_dbm_hz + 10.0 * math.log10(bandwidth_hz))


@dataclass(frozen=True)
class SlotClock:
    horizon_slots: int
    current_slot: int = 0
    slot_duration: float = 1e-3

    def __post_init__(self):
        if self.horizon_slots < 1:
            raise ConfigurationError("horizon must contain at least one slot", key="horizon")
        if not 0 <= self.current_slot < self.horizon_slots:
            raise UsageError(f"slot {self.current_slot} outside [0, {self.horizon_slots})")

    def advance(self) -> "SlotClock":
        return SlotClock(self.horizon_slots, self.current_slot + 1, self.slot_duration)

    @property
    def remaining(self) -> int:
        """Slots left including the current one."""
        return self.horizon_slots - self.current_slot


@dataclass(frozen=True)
class RbRadioParams:
    bandwidth_hz: float
    tx_power_watts: float
    noise_power_watts: float

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ConfigurationError("bandwidth must be positive", key="bandwidth_hz")
        if not self.tx_power_watts >= 0:
            raise ConfigurationError("transmit power must be nonnegative", key="tx_power_watts")
        if not self.noise_power_watts > 0:
            raise ConfigurationError("noise power must be positive", key="noise_power_watts")

    @classmethod
    def from_dbm(cls, bandwidth_hz, tx_power_dbm, noise_density_dbm_hz=THERMAL_NOISE_DBM_PER_HZ):
        return cls(bandwidth_hz, dbm_to_watts(tx_power_dbm),
                   thermal_noise_watts(bandwidth_hz, noise_density_dbm_hz))


@dataclass(frozen=True, eq=False)
class ChannelGains:
    """Power gains indexed ``[mtcd, rb]``."""

    gain: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gain, dtype=float)
        if g.ndim != 2:
            raise UsageError("gain matrix must be 2-D (mtcds x rbs)")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ConfigurationError("channel power gains must be finite and nonnegative", key="gain")
        g.setflags(write=False)
        object.__setattr__(self, "gain", g)

    @property
    def shape(self):
        return self.gain.shape


@dataclass(frozen=True)
class RewardParams:
    discount: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.discount <= 1.0:
            raise ConfigurationError(f"discount {self.discount} outside [0, 1]", key="discount")


def draw_power_gains(rng: np.random.Generator, size) -> np.ndarray:
    """Squared standard-normal draws: unit-mean power gains."""
    return rng.standard_normal(size) ** 2


def idle_rate(own_gain, params: RbRadioParams):
    snr = params.tx_power_watts * np.asarray(own_gain) / params.noise_power_watts
    return params.bandwidth_hz * np.log2(1.0 + snr)


def busy_rate(own_gain, interference_gain_sum, params: RbRadioParams):
    p = params.tx_power_watts
    sinr = p * np.asarray(own_gain) / (p * np.asarray(interference_gain_sum) + params.noise_power_watts)
    return params.bandwidth_hz * np.log2(1.0 + sinr)


def rb_rate(n: int, r: int, rb_state: int, gains: ChannelGains, params: RbRadioParams,
            interferers: Sequence[int] = ()) -> float:
    """Rate in bit/s that MTCD ``n`` gets on RB ``r`` (0-based indices)."""
    n_mtcd, n_rb = gains.shape
    if not 0 <= n < n_mtcd:
        raise UsageError(f"mtcd index {n} out of range [0, {n_mtcd})")
    if not 0 <= r < n_rb:
        raise UsageError(f"rb index {r} out of range [0, {n_rb})")
    if not params.noise_power_watts > 0:
        raise ConfigurationError("noise power must be positive", key="noise_power_watts")
    interferers = list(interferers)
    for m in interferers:
        if not 0 <= m < n_mtcd:
            raise UsageError(f"interferer index {m} out of range [0, {n_mtcd})")
        if m == n:
            raise UsageError("an MTCD cannot interfere with itself")
    if int(rb_state) == 0:
        if interferers:
            raise UsageError("an idle RB has no co-channel occupants")
        return float(idle_rate(gains.gain[n, r], params))
    if not interferers:
        raise UsageError("a busy RB needs at least one co-channel occupant")
    total = float(sum(gains.gain[m, r] for m in interferers))
    return float(busy_rate(gains.gain[n, r], total, params))


def slot_reward(action: int, achievable: Sequence[float]) -> float:
    """Reward of one slot: zero without access, else the rate of the chosen RB (``action`` is 1-based)."""
    if action == NO_ACCESS:
        return 0.0
    if not 1 <= action <= len(achievable):
        raise UsageError(f"action RB_{action} out of range for {len(achievable)} RBs")
    return float(achievable[action - 1])


def slot_weights(horizon: int, discount: float) -> np.ndarray:
    """Weight of slot k in the period total: discount ** (K - k - 1)."""
    RewardParams(discount)
    return discount ** np.arange(horizon - 1, -1, -1, dtype=float)


def discounted_total(per_slot_rewards: Sequence[float], discount: float) -> float:
    rewards = np.asarray(per_slot_rewards, dtype=float)
    if rewards.ndim != 1 or rewards.size < 1:
        raise UsageError("need at least one slot reward")
    return float(slot_weights(rewards.size, discount) @ rewards)


@lru_cache(maxsize=64)
def expected_rates(params: RbRadioParams, interferers: int = 1, samples: int = 100_000,
                   seed: int = 0) -> tuple[float, float]:
    """Monte Carlo ``(E[rate | idle], E[rate | busy])`` over the gain distribution.

    Cached per argument set; the same seed always gives the same pair.
    """
    if samples < 1:
        raise UsageError("need at least one sample")
    if interferers < 1:
        raise ConfigurationError("a busy RB needs at least one occupant", key="interferers_per_busy_rb")
    rng = np.random.default_rng(seed)
    own = draw_power_gains(rng, samples)
    other = draw_power_gains(rng, (samples, interferers)).sum(axis=1)
    return float(idle_rate(own, params).mean()), float(busy_rate(own, other, params).mean())
