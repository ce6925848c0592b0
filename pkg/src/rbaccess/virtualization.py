"""Static slicing of the physical cell into virtual networks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from rbaccess.dynamics import ObservationModel, TransitionModel
from rbaccess.errors import ConfigurationError
from rbaccess.radio import THERMAL_NOISE_DBM_PER_HZ, RbRadioParams, dbm_to_watts, thermal_noise_watts


@dataclass(frozen=True)
class SliceSpec:
    mtcds: int
    rbs: int
    bandwidth_hz: float
    tx_power_dbm: Optional[float] = None
    rho: Optional[float] = None
    upsilon: Optional[float] = None
    qos_class: str = ""

    def __post_init__(self):
        if self.mtcds < 1:
            raise ConfigurationError("a slice needs at least one MTCD", key="slices.mtcds")
        if self.rbs < 1:
            raise ConfigurationError("a slice needs at least one RB", key="slices.rbs")
        if not self.bandwidth_hz > 0:
            raise ConfigurationError("slice bandwidth must be positive", key="slices.bandwidth_mhz")


@dataclass(frozen=True)
class PhysicalNetworkConfig:
    num_vehicles: int = 50
    num_rbs: int = 25
    slices: tuple = field(default_factory=lambda: default_slices())
    tx_power_dbm: float = 20.0
    noise_density_dbm_hz: float = THERMAL_NOISE_DBM_PER_HZ
    noise_power_watts: Optional[float] = None
    chain: TransitionModel = field(default_factory=lambda: TransitionModel(0.15, 0.9))
    rho: float = 0.1
    upsilon: float = 0.1
    interferers_per_busy_rb: int = 1

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(self.slices))
        if self.num_vehicles < 1:
            raise ConfigurationError("need at least one vehicle", key="physical.num_vehicles")
        if self.num_rbs < 1:
            raise ConfigurationError("need at least one RB", key="physical.num_rbs")
        if self.interferers_per_busy_rb < 1:
            raise ConfigurationError("a busy RB has at least one occupant",
                                     key="physical.interferers_per_busy_rb")
        if self.noise_power_watts is not None and not self.noise_power_watts > 0:
            raise ConfigurationError("noise power must be positive", key="physical.noise_power_watts")
        ObservationModel(self.rho, self.upsilon)

    def with_slice(self, index: int, **changes) -> "PhysicalNetworkConfig":
        slices = list(self.slices)
        slices[index] = replace(slices[index], **changes)
        return replace(self, slices=tuple(slices))


@dataclass(frozen=True)
class VirtualNetworkConfig:
    index: int
    qos_class: str
    mtcds: int
    rbs: int
    slice_bandwidth_hz: float
    radio: RbRadioParams
    trans: TransitionModel
    obs_model: ObservationModel
    interferers_per_busy_rb: int = 1

    def __post_init__(self):
        if abs(self.radio.bandwidth_hz * self.rbs - self.slice_bandwidth_hz) > 1e-6 * self.slice_bandwidth_hz:
            raise ConfigurationError("per-RB bandwidth must equal slice bandwidth / RB count",
                                     key="slices.bandwidth_mhz")


def default_slices() -> tuple:
    return (SliceSpec(30, 5, 10e6, qos_class="vn1"),) + tuple(
        SliceSpec(5, 5, 5e6, qos_class=f"vn{i}") for i in range(2, 6))


def slice_network(phys: PhysicalNetworkConfig) -> list:
    """Resolve every slice into a self-contained virtual-network configuration."""
    if not phys.slices:
        raise ConfigurationError("at least one slice is required", key="slices")
    total_mtcds = sum(s.mtcds for s in phys.slices)
    total_rbs = sum(s.rbs for s in phys.slices)
    if total_mtcds > phys.num_vehicles:
        raise ConfigurationError(f"slices use {total_mtcds} MTCDs but the cell has {phys.num_vehicles}",
                                 key="physical.num_vehicles")
    if total_rbs > phys.num_rbs:
        raise ConfigurationError(f"slices use {total_rbs} RBs but the cell has {phys.num_rbs}",
                                 key="physical.num_rbs")
    out = []
    for i, s in enumerate(phys.slices):
        per_rb = s.bandwidth_hz / s.rbs
        power = phys.tx_power_dbm if s.tx_power_dbm is None else s.tx_power_dbm
        noise = (phys.noise_power_watts if phys.noise_power_watts is not None
                 else thermal_noise_watts(per_rb, phys.noise_density_dbm_hz))
        radio = RbRadioParams(per_rb, dbm_to_watts(power), noise)
        obs = ObservationModel(phys.rho if s.rho is None else s.rho,
                               phys.upsilon if s.upsilon is None else s.upsilon)
        out.append(VirtualNetworkConfig(i, s.qos_class or f"vn{i + 1}", s.mtcds, s.rbs, s.bandwidth_hz,
                                        radio, phys.chain, obs, phys.interferers_per_busy_rb))
    return out
