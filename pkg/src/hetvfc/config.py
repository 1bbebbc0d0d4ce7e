"""Experiment configuration: nested dataclasses loaded from and dumped to YAML.

Unknown keys are rejected and every validation error names the offending
field by its dotted path (``phy.gamma_v``).  Missing keys take the defaults
below, which reproduce the reference simulation set-up.
"""

from __future__ import annotations

import dataclasses
import itertools
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .channel import ChannelParams
from .phy import PhyParams, dbm_per_hz_to_w
from .rbmm import RbmmConfig
from .scenario import IdmParams

__all__ = [
    "ConfigError",
    "IdmConfig",
    "ScenarioConfig",
    "PhyConfig",
    "ChannelConfig",
    "SolverConfig",
    "BaselineConfig",
    "SweepAxis",
    "ExperimentConfig",
    "METHODS",
    "SWEEP_ALIASES",
    "load_config",
    "loads_config",
    "dump_config",
    "from_dict",
    "apply_override",
    "get_field",
    "validate",
    "sweep_points",
]

METHODS = ("rbmm", "vlc_only", "rf_only", "lc", "pso", "cmaes", "oracle")
# One sweep name that drives several fields at once.
SWEEP_ALIASES = {"phy.gamma": ("phy.gamma_v", "phy.gamma_r")}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class IdmConfig:
    desired_speed: float = 20.0
    time_headway: float = 1.5
    max_accel: float = 1.0
    comfort_decel: float = 2.0
    jam_distance: float = 2.0
    exponent: float = 4.0

    def params(self) -> IdmParams:
        return IdmParams(**dataclasses.asdict(self))


@dataclass
class ScenarioConfig:
    vehicles: int = 40  # expected N
    lanes: int = 3
    lane_width: float = 3.5  # [m]
    density: float = 0.04  # [vehicles/m/lane]
    width: float = 2.2  # D1 [m]
    length: float = 4.0  # D2 [m]
    compute: float = 2e9  # C_n [cycles/s]
    arrival_rate: float = 10.0  # lambda [1/s]
    slot_length: float = 0.06  # Lambda [s]
    task_size_kb: list[float] = field(default_factory=lambda: [300.0, 500.0])
    bits_per_kb: float = 1000.0
    intensity: float = 200.0  # kappa [cycles/bit]
    slots: int = 1
    mobility_dt: float = 0.01  # [s] IDM integration step between slots
    idm: IdmConfig = field(default_factory=IdmConfig)

    @property
    def road_length(self) -> float:
        return self.vehicles / (self.lanes * self.density)

    @property
    def size_range_bits(self) -> tuple[float, float]:
        lo, hi = self.task_size_kb
        return lo * self.bits_per_kb, hi * self.bits_per_kb


@dataclass
class PhyConfig:
    n_vlc: int = 8
    n_rf: int = 8
    gamma_v: float = 0.5e6  # [Hz]
    gamma_r: float = 0.5e6  # [Hz]
    mu_v: float = 1e-21  # [A^2/Hz]
    mu_r_dbm_hz: float = -174.0
    power_vlc: float = 0.1  # [W]
    power_rf: float = 0.1  # [W]
    unassigned_interference: bool = True

    def params(self) -> PhyParams:
        return PhyParams(self.n_vlc, self.n_rf, self.gamma_v, self.gamma_r, self.mu_v,
                         dbm_per_hz_to_w(self.mu_r_dbm_hz), self.power_vlc, self.power_rf,
                         self.unassigned_interference)


@dataclass
class ChannelConfig:
    half_power_angle_deg: float = 30.0
    pd_area: float = 1e-4
    responsivity: float = 0.54
    fov_deg: float = 60.0
    vlc_max_range: float = 100.0
    pl_exponent: float = 2.5
    pl_ref_db: float = -60.0
    ref_distance: float = 1.0

    def params(self) -> ChannelParams:
        return ChannelParams(**dataclasses.asdict(self))


@dataclass
class SolverConfig:
    xi: float = 0.4
    epsilon: float = 1e-4  # [s]
    accuracy: float = 1e-8
    max_iterations: int = 30
    time_unit: float = 1e-3  # [s]
    init: str = "capacity"
    deadline: bool = True  # enforce TPD <= slot length

    def params(self) -> RbmmConfig:
        return RbmmConfig(self.xi, self.epsilon, self.max_iterations, self.accuracy, self.init, self.time_unit)


@dataclass
class BaselineConfig:
    pso_particles: int = 60
    pso_iterations: int = 200
    pso_inertia: float = 0.72
    pso_cognitive: float = 1.49
    pso_social: float = 1.49
    cmaes_evaluations: int = 5000
    cmaes_sigma0: float = 0.3
    cmaes_population: typing.Optional[int] = None
    temperature: float = 0.1
    start_from_init: bool = True
    oracle_resolution: float = 0.01


@dataclass
class SweepAxis:
    field: str = ""
    values: list[float] = dataclasses.field(default_factory=list)


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    methods: list[str] = field(default_factory=lambda: ["rbmm", "vlc_only", "rf_only", "lc"])
    seeds: list[int] = field(default_factory=lambda: list(range(20)))
    sweep: list[SweepAxis] = field(default_factory=list)
    output: str = "results"
    jobs: int = 1


# -- parsing ---------------------------------------------------------------

def _coerce(value, tp, path: str):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], path)
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value, path)
    if origin is list:
        (inner,) = typing.get_args(tp)
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        return [_coerce(v, inner, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        try:
            f = float(value)
        except ValueError:
            raise ConfigError(path, f"expected an integer, got {value!r}") from None
        if not f.is_integer():
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(f)
    if tp is float:
        if isinstance(value, bool):
            raise ConfigError(path, f"expected a number, got {value!r}")
        try:
            return float(value)  # also accepts "2e9", which YAML leaves as a string
        except (TypeError, ValueError):
            raise ConfigError(path, f"expected a number, got {value!r}") from None
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    raise ConfigError(path, f"unsupported field type {tp}")


def from_dict(cls, data, path: str = ""):
    """Build dataclass ``cls`` from a mapping, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        key = unknown[0]
        raise ConfigError(f"{path}.{key}" if path else str(key), "unknown key")
    kwargs = {}
    for name in names & set(data):
        sub = f"{path}.{name}" if path else name
        kwargs[name] = _coerce(data[name], hints[name], sub)
    return cls(**kwargs)


_POSITIVE = {
    "scenario": ["vehicles", "lanes", "lane_width", "density", "width", "length", "compute", "arrival_rate",
                 "slot_length", "bits_per_kb", "intensity", "slots", "mobility_dt"],
    "scenario.idm": ["desired_speed", "time_headway", "max_accel", "comfort_decel", "exponent"],
    "phy": ["n_vlc", "n_rf", "gamma_v", "gamma_r", "mu_v"],
    "channel": ["half_power_angle_deg", "pd_area", "responsivity", "fov_deg", "vlc_max_range", "pl_exponent",
                "ref_distance"],
    "solver": ["xi", "epsilon", "accuracy", "max_iterations", "time_unit"],
    "baselines": ["pso_particles", "cmaes_evaluations", "cmaes_sigma0", "oracle_resolution"],
}
_NONNEGATIVE = {
    "scenario.idm": ["jam_distance"],
    "phy": ["power_vlc", "power_rf"],
    "baselines": ["pso_iterations", "pso_inertia", "pso_cognitive", "pso_social", "temperature"],
}


def get_field(cfg, dotted: str):
    obj = cfg
    for part in dotted.split("."):
        obj = getattr(obj, part)
    return obj


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    for section, names in _POSITIVE.items():
        for name in names:
            if not get_field(cfg, f"{section}.{name}") > 0:
                raise ConfigError(f"{section}.{name}", "must be positive")
    for section, names in _NONNEGATIVE.items():
        for name in names:
            if not get_field(cfg, f"{section}.{name}") >= 0:
                raise ConfigError(f"{section}.{name}", "must be non-negative")
    sc = cfg.scenario
    if len(sc.task_size_kb) != 2 or not 0 < sc.task_size_kb[0] <= sc.task_size_kb[1]:
        raise ConfigError("scenario.task_size_kb", "must be [low, high] with 0 < low <= high")
    if not 0 < cfg.channel.half_power_angle_deg < 90:
        raise ConfigError("channel.half_power_angle_deg", "must lie in (0, 90)")
    if cfg.solver.accuracy >= 1:
        raise ConfigError("solver.accuracy", "must be below 1")
    if cfg.solver.init not in ("capacity", "local"):
        raise ConfigError("solver.init", "must be 'capacity' or 'local'")
    if cfg.baselines.pso_particles < 2:
        raise ConfigError("baselines.pso_particles", "must be at least 2")
    if cfg.baselines.cmaes_population is not None and cfg.baselines.cmaes_population < 4:
        raise ConfigError("baselines.cmaes_population", "must be at least 4")
    if not cfg.methods:
        raise ConfigError("methods", "at least one method is required")
    for i, m in enumerate(cfg.methods):
        if m not in METHODS:
            raise ConfigError(f"methods[{i}]", f"unknown method {m!r} (choose from {', '.join(METHODS)})")
    if not cfg.seeds:
        raise ConfigError("seeds", "at least one seed is required")
    if any(s < 0 for s in cfg.seeds):
        raise ConfigError("seeds", "seeds must be non-negative")
    if cfg.jobs < 1:
        raise ConfigError("jobs", "must be at least 1")
    for i, axis in enumerate(cfg.sweep):
        _check_sweep_field(axis.field, f"sweep[{i}].field")
        if not axis.values:
            raise ConfigError(f"sweep[{i}].values", "at least one value is required")
    return cfg


def _check_sweep_field(name: str, path: str) -> None:
    targets = SWEEP_ALIASES.get(name, (name,))
    for target in targets:
        parts = target.split(".")
        obj = ExperimentConfig()
        for p in parts:
            if not dataclasses.is_dataclass(obj) or p not in {f.name for f in dataclasses.fields(obj)}:
                raise ConfigError(path, f"unknown config field {name!r}")
            obj = getattr(obj, p)
        if isinstance(obj, (bool, list)) or dataclasses.is_dataclass(obj) or not isinstance(obj, (int, float)):
            raise ConfigError(path, f"field {name!r} is not a numeric scalar")


def loads_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"cannot parse config: {exc}") from None
    return validate(from_dict(ExperimentConfig, data))


def load_config(path: str | Path) -> ExperimentConfig:
    return loads_config(Path(path).read_text())


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(dataclasses.asdict(cfg), sort_keys=False)


# -- overrides and sweeps --------------------------------------------------

def apply_override(cfg: ExperimentConfig, name: str, value) -> ExperimentConfig:
    """Copy of ``cfg`` with the dotted field (or alias) set to ``value``."""
    _check_sweep_field(name, name)
    out = from_dict(ExperimentConfig, dataclasses.asdict(cfg))
    for target in SWEEP_ALIASES.get(name, (name,)):
        *parents, leaf = target.split(".")
        obj = out
        for p in parents:
            obj = getattr(obj, p)
        current = getattr(obj, leaf)
        setattr(obj, leaf, _coerce(value, int if isinstance(current, int) else float, target))
    return validate(out)


def sweep_points(cfg: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    """Cartesian product of all sweep axes as ``(label, config)`` pairs."""
    if not cfg.sweep:
        return [("", cfg)]
    out = []
    for combo in itertools.product(*[axis.values for axis in cfg.sweep]):
        point = cfg
        parts = []
        for axis, value in zip(cfg.sweep, combo):
            point = apply_override(point, axis.field, value)
            parts.append(f"{axis.field}={value:g}")
        out.append((";".join(parts), point))
    return out
