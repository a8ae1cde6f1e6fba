"""Scenario configuration: TOML ingestion, validation, defaults, echo.

The schema is a flat set of sections; unknown sections or keys are rejected
by name so typos cannot silently fall back to defaults.  ``load_config``
fills defaults and, when an output directory is configured, echoes the fully
resolved configuration to ``resolved-config.toml`` so a run is reproducible
from its artifacts alone.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields

import tomli

from .errors import ParameterError


@dataclass
class GridConfig:
    n1: int = 32
    n2: int = 32
    length: float = 1.0
    nv: int = 16
    vmax: float = 6.0


@dataclass
class ParamsConfig:
    q: float = 1.0
    m: float = 1.0
    sigma: float = 1.0
    tau: float = 1.0
    eps0: float = 1.0
    mu0: float = 1.0
    eps: float = 0.5
    b0: float = 5.0           # external field floor amplitude
    b_ripple: float = 0.2     # B_ext = b0 (1 + b_ripple cos(2 pi x1 / L))
    d0: float = 1.0           # background amplitude
    d_ripple: float = 0.1     # D = d0 (1 + d_ripple cos(2 pi x1 / L))


@dataclass
class InitialConfig:
    family: str = "well_prepared"
    amplitude: float = 0.1    # n0 = D (1 + a cos(2 pi x1/L) cos(2 pi x2/L))


@dataclass
class TimeConfig:
    t_final: float = 0.5
    dt: float = 0.0           # 0 means: apply the default policy
    cadence: int = 100        # target number of samples per run


@dataclass
class SolverConfig:
    mode: str = "strang"                  # strang | picard
    interpolation: str = "cubic"          # velocity-space moves
    transport: str = "cubic"              # spatial shifts
    monotone: bool = True
    collision_theta: float = 0.5
    mollify_delta: float = 0.05
    picard_tol: float = 1e-10
    picard_max_iter: int = 25
    limiter: str = "vanleer"              # limit-model slope limiter
    b1_refresh: bool = True


@dataclass
class SweepConfig:
    epsilons: tuple = (0.4, 0.2, 0.1)


@dataclass
class OutputConfig:
    directory: str = "out"


@dataclass
class ScenarioConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    params: ParamsConfig = field(default_factory=ParamsConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 1234


_SECTIONS = {
    "grid": GridConfig,
    "params": ParamsConfig,
    "initial": InitialConfig,
    "time": TimeConfig,
    "solver": SolverConfig,
    "sweep": SweepConfig,
    "output": OutputConfig,
}

_FAMILIES = ("well_prepared", "equilibrium")


def validate_config(cfg: ScenarioConfig) -> ScenarioConfig:
    g = cfg.grid
    if g.n1 < 4 or g.n2 < 4 or g.n1 % 2 or g.n2 % 2:
        raise ParameterError("grid: n1, n2 must be even and >= 4")
    if g.nv < 8:
        raise ParameterError("grid: nv must be >= 8")
    if g.length <= 0 or g.vmax <= 0:
        raise ParameterError("grid: length and vmax must be positive")
    p = cfg.params
    for name in ("q", "m", "sigma", "tau", "eps0", "mu0", "b0", "d0"):
        if getattr(p, name) <= 0:
            raise ParameterError(f"params: {name} must be positive")
    if not 0 < p.eps <= 1:
        raise ParameterError("params: eps must lie in (0, 1]")
    if not 0 <= p.b_ripple < 1 or not 0 <= p.d_ripple < 1:
        raise ParameterError("params: field ripples must lie in [0, 1)")
    ini = cfg.initial
    if ini.family not in _FAMILIES:
        raise ParameterError(
            f"initial: unknown family {ini.family!r}; known: {', '.join(_FAMILIES)}")
    if not 0 <= ini.amplitude <= 0.2:
        raise ParameterError("initial: amplitude must lie in [0, 0.2]")
    t = cfg.time
    if t.t_final < 0:
        raise ParameterError("time: t_final must be nonnegative")
    if t.dt < 0:
        raise ParameterError("time: dt must be nonnegative (0 selects the policy)")
    if t.cadence < 1:
        raise ParameterError("time: cadence must be at least 1")
    s = cfg.solver
    if s.mode not in ("strang", "picard"):
        raise ParameterError(f"solver: unknown mode {s.mode!r}")
    if s.interpolation not in ("spectral", "cubic"):
        raise ParameterError(f"solver: unknown interpolation {s.interpolation!r}")
    if s.transport not in ("spectral", "cubic"):
        raise ParameterError(f"solver: unknown transport {s.transport!r}")
    if not 0 <= s.collision_theta <= 1:
        raise ParameterError("solver: collision_theta must lie in [0, 1]")
    eps_list = tuple(float(e) for e in cfg.sweep.epsilons)
    if any(not 0 < e <= 1 for e in eps_list):
        raise ParameterError("sweep: every epsilon must lie in (0, 1]")
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise ParameterError("sweep: epsilon list must be strictly decreasing")
    cfg.sweep.epsilons = eps_list
    return cfg


def default_dt(cfg: ScenarioConfig) -> float:
    """Default step policy: a hundredth of the horizon."""
    if cfg.time.dt > 0:
        return cfg.time.dt
    if cfg.time.t_final == 0:
        return 1.0
    return 0.01 * cfg.time.t_final


def _apply_section(obj, name, data):
    known = {f.name for f in fields(obj)}
    for key, value in data.items():
        if key not in known:
            raise ParameterError(f"{name}: unknown key {key!r}")
        if key == "epsilons":
            value = tuple(float(v) for v in value)
        setattr(obj, key, value)


def load_config(path: str, echo: bool = True) -> ScenarioConfig:
    """Parse, validate and (optionally) echo a scenario file."""
    with open(path, "rb") as fh:
        try:
            data = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ParameterError(f"{path}: {exc}") from exc
    cfg = ScenarioConfig()
    for section, payload in data.items():
        if section == "seed":
            cfg.seed = int(payload)
            continue
        if section not in _SECTIONS:
            raise ParameterError(f"unknown section {section!r}")
        _apply_section(getattr(cfg, section), section, payload)
    cfg = validate_config(cfg)
    if echo and cfg.output.directory:
        os.makedirs(cfg.output.directory, exist_ok=True)
        write_resolved(cfg, os.path.join(cfg.output.directory, "resolved-config.toml"))
    return cfg


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def write_resolved(cfg: ScenarioConfig, path: str):
    """Write the fully resolved configuration as TOML."""
    lines = [f"seed = {cfg.seed}", ""]
    for section in _SECTIONS:
        lines.append(f"[{section}]")
        for key, value in asdict(getattr(cfg, section)).items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
