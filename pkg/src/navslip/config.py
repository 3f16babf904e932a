"""Sectioned ``key = value`` run configuration.

Sections: [domain], [physics], [numerics], [experiment], [output]. Parsing is
strict: unknown sections or keys are errors, so a typo never silently falls
back to a default.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace

from .dynamics import INITIAL_DATA, PhysParams, StepControl
from .experiments import DEFAULT_K_LIST, SweepSetup
from .lame import LameParams, SlipBC
from .mesh import Grid, build_grid
from .transport import RHO_FLOOR, VARIANTS, TransportScheme


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DomainConfig:
    nx: int
    nz: int
    lx: float = 1.0
    dim: int = 2


@dataclass(frozen=True)
class PhysicsConfig:
    mu: float = 0.1
    lam: float = 0.0
    pressure_A: float = 1.0
    pressure_gamma: float = 1.4
    k: float = 0.0


@dataclass(frozen=True)
class NumericsConfig:
    cfl_factor: float = 0.4
    picard_max: int = 1
    picard_tol: float = 1e-10
    linear_tol: float = 1e-10
    rho_floor: float = RHO_FLOOR
    transport_scheme: str = "upwind1"


@dataclass(frozen=True)
class ExperimentConfig:
    t_final: float
    output_count: int = 50
    k_list: tuple[float, ...] = DEFAULT_K_LIST
    initial: str = "default"


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    domain: DomainConfig
    experiment: ExperimentConfig
    physics: PhysicsConfig = PhysicsConfig()
    numerics: NumericsConfig = NumericsConfig()
    output: OutputConfig = OutputConfig()

    # -- builders for the numerical types
    def grid(self) -> Grid:
        return build_grid(self.domain.lx, self.domain.nx, self.domain.nz)

    def lame(self) -> LameParams:
        return LameParams(self.physics.mu, self.physics.lam)

    def phys(self, k: float | None = None) -> PhysParams:
        k = self.physics.k if k is None else k
        return PhysParams(self.lame(), self.physics.pressure_A, self.physics.pressure_gamma, SlipBC(k))

    def ctrl(self) -> StepControl:
        n = self.numerics
        return StepControl(n.cfl_factor, n.picard_max, n.picard_tol, n.linear_tol, n.rho_floor,
                           TransportScheme(n.transport_scheme))

    def sweep_setup(self) -> SweepSetup:
        return SweepSetup(self.grid(), self.lame(), self.physics.pressure_A, self.physics.pressure_gamma,
                          self.ctrl(), self.experiment.t_final, self.experiment.output_count,
                          self.experiment.initial)

    def output_times(self) -> list[float]:
        return self.sweep_setup().output_times

    def to_dict(self) -> dict:
        out = {}
        for sec in SECTIONS:
            out[sec] = {f.name: _plain(getattr(getattr(self, sec), f.name))
                        for f in fields(SECTIONS[sec])}
        return out


SECTIONS = {"domain": DomainConfig, "physics": PhysicsConfig, "numerics": NumericsConfig,
            "experiment": ExperimentConfig, "output": OutputConfig}
REQUIRED = {("domain", "nx"), ("domain", "nz"), ("experiment", "t_final")}


def _plain(v):
    return list(v) if isinstance(v, tuple) else v


def _convert(section: str, key: str, raw: str, typ):
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError("not finite")
            return value
        if typ is str:
            return raw.strip()
        # tuple fields: comma-separated lists
        items = [s.strip() for s in raw.split(",") if s.strip()]
        if key == "k_list":
            return tuple(float(s) for s in items)
        return tuple(items)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


_TYPES = {
    **{(s, f.name): f.type for s, cls in SECTIONS.items() for f in fields(cls)},
}
_PY_TYPES = {"int": int, "float": float, "str": str}


def _field_type(section, key):
    name = _TYPES[(section, key)]
    return _PY_TYPES.get(name, tuple)


def validate(cfg: RunConfig) -> RunConfig:
    d, p, n, e = cfg.domain, cfg.physics, cfg.numerics, cfg.experiment
    if d.dim != 2:
        raise ConfigError(f"[domain] dim = {d.dim}: only 2D channels are supported")
    if d.nx < 4 or d.nz < 4:
        raise ConfigError(f"[domain] nx, nz must be >= 4 (got {d.nx}, {d.nz})")
    if d.lx <= 0:
        raise ConfigError(f"[domain] lx must be positive (got {d.lx})")
    if p.mu <= 0 or p.mu + 3 * p.lam <= 0:
        raise ConfigError(f"viscosity condition violated: need mu > 0 and mu + 3 lam > 0 "
                          f"(mu = {p.mu}, lam = {p.lam}, mu + 3 lam = {p.mu + 3 * p.lam})")
    if p.pressure_A <= 0 or p.pressure_gamma < 1:
        raise ConfigError(f"pressure law needs A > 0 and gamma >= 1 (got {p.pressure_A}, {p.pressure_gamma})")
    if p.k < 0:
        raise ConfigError(f"[physics] k must be >= 0 (got {p.k})")
    if not 0 < n.cfl_factor <= 1:
        raise ConfigError(f"[numerics] cfl_factor must be in (0, 1] (got {n.cfl_factor})")
    if n.picard_max < 1 or n.picard_tol <= 0 or n.linear_tol <= 0 or n.rho_floor <= 0:
        raise ConfigError("[numerics] picard_max >= 1 and positive tolerances/floor required")
    if n.transport_scheme not in VARIANTS:
        raise ConfigError(f"[numerics] transport_scheme = {n.transport_scheme!r}; expected one of {VARIANTS}")
    if e.t_final <= 0:
        raise ConfigError(f"[experiment] t_final must be positive (got {e.t_final})")
    if e.output_count < 1:
        raise ConfigError("[experiment] output_count must be >= 1")
    if any(k < 0 for k in e.k_list) or 0.0 not in e.k_list:
        raise ConfigError("[experiment] k_list must be nonnegative and contain 0")
    if e.initial not in INITIAL_DATA:
        raise ConfigError(f"[experiment] initial = {e.initial!r}; expected one of {sorted(INITIAL_DATA)}")
    return cfg


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str          # keys are case-sensitive (pressure_A)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    values: dict[str, dict] = {s: {} for s in SECTIONS}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if (section, key) not in _TYPES:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[section][key] = _convert(section, key, raw, _field_type(section, key))
    for section, key in sorted(REQUIRED):
        if key not in values[section]:
            raise ConfigError(f"missing required key {key!r} in [{section}]")
    cfg = RunConfig(**{s: SECTIONS[s](**values[s]) for s in SECTIONS})
    return validate(cfg)


def _format(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(cfg: RunConfig) -> str:
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        obj = getattr(cfg, section)
        for f in fields(obj):
            lines.append(f"{f.name} = {_format(getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def with_output_dir(cfg: RunConfig, directory: str) -> RunConfig:
    return replace(cfg, output=replace(cfg.output, directory=directory))
