"""Run configuration: TOML schema, defaults, validation, and round-trip dumping.

Schema (every key optional; omitted keys take the defaults shown)::

    preset = "fig2"            # fig2 | fig3 | fig4 | custom
    seed = 2016
    replications = 1000
    horizon = 20
    grid = 21
    discount = 0.9
    output_dir = "results"
    focal_slice = 1            # 1-based slice the sweeps evaluate
    memory_cap_mib = 3072
    policies = ["optimal_pomdp", "random_selection", "no_observation", "perfect_knowledge"]

    [custom]                   # used by preset = "custom"
    axis = "false_obs"         # horizon | rb_count | false_obs
    points = [0.1, 0.5]

    [physical]
    num_vehicles = 50
    num_rbs = 25
    tx_power_dbm = 20.0
    noise_density_dbm_hz = -174.0
    noise_power_watts = 1e-13  # optional; overrides the thermal-density noise
    interferers_per_busy_rb = 1

    [chain]                    # give one or both entries per row
    p_idle_idle = 0.85
    p_idle_busy = 0.15
    p_busy_idle = 0.9
    p_busy_busy = 0.1
    poisson_rate = 0.7         # optional

    [observation]
    rho = 0.1
    upsilon = 0.1

    [[slices]]                 # repeat per slice; omitting all gives the 5-slice preset
    mtcds = 30
    rbs = 5
    bandwidth_mhz = 10.0       # or bandwidth_hz
    qos_class = "vn1"
    tx_power_dbm = 20.0        # optional per-slice overrides
    rho = 0.1
    upsilon = 0.1
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import tomli_w

from rbaccess.dynamics import ObservationModel, TransitionModel
from rbaccess.errors import ConfigurationError
from rbaccess.policies import ALL_POLICIES, PolicyKind
from rbaccess.virtualization import PhysicalNetworkConfig, SliceSpec, default_slices, slice_network

PRESETS = ("fig2", "fig3", "fig4", "custom")
AXES = ("horizon", "rb_count", "false_obs")


@dataclass(frozen=True)
class RunConfig:
    physical: PhysicalNetworkConfig = field(default_factory=PhysicalNetworkConfig)
    preset: str = "fig2"
    seed: int = 2016
    replications: int = 1000
    horizon: int = 20
    grid: int = 21
    discount: float = 0.9
    output_dir: str = "results"
    focal_slice: int = 1
    memory_cap_mib: int = 3072
    policies: tuple = tuple(k.value for k in ALL_POLICIES)
    custom_axis: str = "false_obs"
    custom_points: tuple = (0.1, 0.5)

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "custom_points", tuple(self.custom_points))
        if self.preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {self.preset!r}; choose from {PRESETS}", key="preset")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer", key="seed")
        for key in ("replications", "horizon", "focal_slice", "memory_cap_mib"):
            if getattr(self, key) < 1:
                raise ConfigurationError(f"{key} must be at least 1", key=key)
        if self.grid < 2:
            raise ConfigurationError("grid needs at least two points per axis", key="grid")
        if not 0.0 <= self.discount <= 1.0:
            raise ConfigurationError("discount must lie in [0, 1]", key="discount")
        if not self.policies:
            raise ConfigurationError("at least one policy is required", key="policies")
        for p in self.policies:
            if p not in {k.value for k in ALL_POLICIES}:
                raise ConfigurationError(f"unknown policy {p!r}", key="policies")
        if self.custom_axis not in AXES:
            raise ConfigurationError(f"unknown axis {self.custom_axis!r}; choose from {AXES}", key="custom.axis")
        if not self.custom_points:
            raise ConfigurationError("custom sweep needs at least one point", key="custom.points")
        if self.focal_slice > len(self.physical.slices):
            raise ConfigurationError(f"focal slice {self.focal_slice} does not exist", key="focal_slice")
        slice_network(self.physical)

    @property
    def policy_kinds(self):
        return [PolicyKind(p) for p in self.policies]


_TOP = {"preset": str, "seed": int, "replications": int, "horizon": int, "grid": int, "discount": float,
        "output_dir": str, "focal_slice": int, "memory_cap_mib": int, "policies": list}
_PHYSICAL = {"num_vehicles": int, "num_rbs": int, "tx_power_dbm": float, "noise_density_dbm_hz": float,
             "noise_power_watts": float, "interferers_per_busy_rb": int}
_CHAIN = {"p_idle_idle": float, "p_idle_busy": float, "p_busy_idle": float, "p_busy_busy": float,
          "poisson_rate": float}
_OBS = {"rho": float, "upsilon": float}
_SLICE = {"mtcds": int, "rbs": int, "bandwidth_mhz": float, "bandwidth_hz": float, "qos_class": str,
          "tx_power_dbm": float, "rho": float, "upsilon": float}
_CUSTOM = {"axis": str, "points": list}
_TABLES = {"physical": _PHYSICAL, "chain": _CHAIN, "observation": _OBS, "custom": _CUSTOM}


def _line_of(text: str, key: str) -> Optional[int]:
    leaf = key.split(".")[-1]
    pattern = re.compile(rf"^\s*(\[+\s*{re.escape(leaf)}\s*\]+|{re.escape(leaf)}\s*=)")
    for no, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return no
    return None


def _typed(value, kind, key, text):
    ok = isinstance(value, kind) and not isinstance(value, bool)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value, ok = float(value), True
    if not ok:
        raise ConfigurationError(f"expected {kind.__name__}, got {type(value).__name__}",
                                 key=key, line=_line_of(text, key))
    return value


def _section(data, schema, prefix, text):
    out = {}
    for k, v in data.items():
        key = f"{prefix}{k}"
        if k not in schema:
            raise ConfigurationError("unknown key", key=key, line=_line_of(text, key))
        out[k] = _typed(v, schema[k], key, text)
    return out


def _chain_model(c: dict, text: str) -> TransitionModel:
    def row(stay_key, leave_key, default_leave):
        stay, leave = c.get(stay_key), c.get(leave_key)
        if leave is None:
            leave = default_leave if stay is None else 1.0 - stay
        if stay is not None and abs(stay + leave - 1.0) > 1e-9:
            raise ConfigurationError(f"{stay_key} + {leave_key} must equal 1", key=f"chain.{stay_key}",
                                     line=_line_of(text, stay_key))
        return leave

    ib = row("p_idle_idle", "p_idle_busy", 0.15)
    bi = row("p_busy_busy", "p_busy_idle", 0.9)
    try:
        return TransitionModel(ib, bi, c.get("poisson_rate"))
    except ConfigurationError as e:
        raise ConfigurationError(str(e), key=f"chain.{e.key}", line=_line_of(text, e.key or "chain")) from None


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"malformed config: {e}", key="<file>",
                                 line=getattr(e, "lineno", None)) from None
    sections = {}
    slices_raw = data.pop("slices", None)
    for name, schema in _TABLES.items():
        raw = data.pop(name, {})
        if not isinstance(raw, dict):
            raise ConfigurationError("expected a table", key=name, line=_line_of(text, name))
        sections[name] = _section(raw, schema, f"{name}.", text)
    top = _section(data, _TOP, "", text)

    slices = None
    if slices_raw is not None:
        if not isinstance(slices_raw, list) or not all(isinstance(s, dict) for s in slices_raw):
            raise ConfigurationError("expected an array of tables", key="slices", line=_line_of(text, "slices"))
        slices = []
        for raw in slices_raw:
            s = _section(raw, _SLICE, "slices.", text)
            if "bandwidth_hz" in s and "bandwidth_mhz" in s:
                raise ConfigurationError("give bandwidth_hz or bandwidth_mhz, not both", key="slices.bandwidth_hz",
                                         line=_line_of(text, "bandwidth_hz"))
            bw = s.pop("bandwidth_hz", None)
            if bw is None:
                bw = s.pop("bandwidth_mhz", 5.0) * 1e6
            for k in ("mtcds", "rbs"):
                if k not in s:
                    raise ConfigurationError("required slice key missing", key=f"slices.{k}",
                                             line=_line_of(text, "slices"))
            try:
                slices.append(SliceSpec(bandwidth_hz=bw, **s))
            except ConfigurationError as e:
                raise ConfigurationError(str(e), key=e.key, line=_line_of(text, e.key or "slices")) from None

    obs = sections["observation"]
    phys_kwargs = dict(sections["physical"])
    phys_kwargs["chain"] = _chain_model(sections["chain"], text)
    phys_kwargs["rho"] = obs.get("rho", 0.1)
    phys_kwargs["upsilon"] = obs.get("upsilon", 0.1)
    phys_kwargs["slices"] = tuple(slices) if slices is not None else default_slices()
    for key in ("policies",):
        if key in top and not all(isinstance(p, str) for p in top[key]):
            raise ConfigurationError("expected a list of strings", key=key, line=_line_of(text, key))
    custom = sections["custom"]
    kwargs = dict(top)
    if "axis" in custom:
        kwargs["custom_axis"] = custom["axis"]
    if "points" in custom:
        pts = custom["points"]
        if not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in pts):
            raise ConfigurationError("expected a list of numbers", key="custom.points",
                                     line=_line_of(text, "points"))
        kwargs["custom_points"] = tuple(float(p) for p in pts)
    try:
        ObservationModel(phys_kwargs["rho"], phys_kwargs["upsilon"])
        return RunConfig(physical=PhysicalNetworkConfig(**phys_kwargs), **kwargs)
    except ConfigurationError as e:
        key = e.key or "<file>"
        if key in ("rho", "upsilon"):
            key = f"observation.{key}"
        msg = str(e).split("] ", 1)[-1]
        raise ConfigurationError(msg, key=key, line=_line_of(text, key)) from None


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_dict(cfg: RunConfig) -> dict:
    phys = cfg.physical
    physical = {
        "num_vehicles": phys.num_vehicles,
        "num_rbs": phys.num_rbs,
        "tx_power_dbm": phys.tx_power_dbm,
        "noise_density_dbm_hz": phys.noise_density_dbm_hz,
        "interferers_per_busy_rb": phys.interferers_per_busy_rb,
    }
    if phys.noise_power_watts is not None:
        physical["noise_power_watts"] = phys.noise_power_watts
    chain = {"p_idle_busy": phys.chain.p_idle_to_busy, "p_busy_idle": phys.chain.p_busy_to_idle}
    if phys.chain.poisson_rate is not None:
        chain["poisson_rate"] = phys.chain.poisson_rate
    slices = []
    for s in phys.slices:
        d = {"mtcds": s.mtcds, "rbs": s.rbs, "bandwidth_hz": s.bandwidth_hz, "qos_class": s.qos_class}
        for k in ("tx_power_dbm", "rho", "upsilon"):
            if getattr(s, k) is not None:
                d[k] = getattr(s, k)
        slices.append(d)
    return {
        "preset": cfg.preset, "seed": cfg.seed, "replications": cfg.replications, "horizon": cfg.horizon,
        "grid": cfg.grid, "discount": cfg.discount, "output_dir": cfg.output_dir,
        "focal_slice": cfg.focal_slice, "memory_cap_mib": cfg.memory_cap_mib, "policies": list(cfg.policies),
        "custom": {"axis": cfg.custom_axis, "points": list(cfg.custom_points)},
        "physical": physical,
        "chain": chain,
        "observation": {"rho": phys.rho, "upsilon": phys.upsilon},
        "slices": slices,
    }


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_dict(cfg))
