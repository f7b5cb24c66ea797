"""Run configuration: one JSON document, validated up front."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .fieldexpr import ExprError, check_variables, parse_expression, sample_vector
from .grid import KINDS, build_grid
from .operators import PecletError, check_peclet

FORMATS = ("csv", "json")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class GridConfig:
    kind: str = "interval"
    N: int | None = None
    m: int = 65
    bounds: list | None = None


@dataclass
class AdvectionConfig:
    components: list = field(default_factory=list)


@dataclass
class SolverConfig:
    lam: float = 0.0
    lam_step0: float = 0.1
    newton_tol: float = 1e-10
    bracket_tol: float = 1e-6
    max_steps: int = 1000


@dataclass
class SpectralConfig:
    eig_tol: float = 1e-8
    lam: float = 0.0


@dataclass
class VerifyConfig:
    beta: list = field(default_factory=lambda: [1.25, 1.5, 1.75])
    t_fractions: list = field(default_factory=lambda: [0.5, 0.9, 0.99])
    psi_count: int = 50
    seed: int = 42


@dataclass
class OracleConfig:
    eta_grid: int = 200
    max_step: float = 1e-4


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list = field(default_factory=lambda: list(FORMATS))


@dataclass
class Config:
    grid: GridConfig = field(default_factory=GridConfig)
    advection: AdvectionConfig = field(default_factory=AdvectionConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def hash(self) -> str:
        """Hash of the resolved config excluding the output directory."""
        d = self.to_dict()
        d["output"] = {k: v for k, v in d["output"].items() if k != "directory"}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def build_grid(self):
        g = self.grid
        return build_grid(g.kind, g.N, g.m, g.bounds)

    def advection_field(self, grid=None):
        g = self.build_grid() if grid is None else grid
        if not self.advection.components:
            return np.zeros((g.size, g.ncomp))
        return sample_vector(g, self.advection.components).values


_CLASSES = {
    "grid": GridConfig, "advection": AdvectionConfig, "solver": SolverConfig,
    "spectral": SpectralConfig, "verify": VerifyConfig, "oracle": OracleConfig, "output": OutputConfig,
}


def from_dict(data: dict) -> Config:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    sections = {}
    for name, value in data.items():
        if name not in _CLASSES:
            raise ConfigError(name, "unknown section")
        if not isinstance(value, dict):
            raise ConfigError(name, "section must be an object")
        cls = _CLASSES[name]
        known = {f.name for f in fields(cls)}
        for k in value:
            if k not in known:
                raise ConfigError(f"{name}.{k}", "unknown key")
        sections[name] = cls(**value)
    cfg = Config(**sections)
    validate(cfg)
    return cfg


def _number(key: str, x, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(key, f"expected a number, got {x!r}")
    if integer and int(x) != x:
        raise ConfigError(key, f"expected an integer, got {x!r}")
    if not np.isfinite(x):
        raise ConfigError(key, "must be finite")
    if lo is not None and (x < lo or (lo_open and x == lo)):
        raise ConfigError(key, f"{x!r} below the admissible range")
    if hi is not None and (x > hi or (hi_open and x == hi)):
        raise ConfigError(key, f"{x!r} above the admissible range")


def _list(key: str, x) -> list:
    if not isinstance(x, list) or not x:
        raise ConfigError(key, "expected a nonempty list")
    return x


def validate(cfg: Config) -> None:
    g = cfg.grid
    if g.kind not in KINDS:
        raise ConfigError("grid.kind", f"must be one of {KINDS}, got {g.kind!r}")
    _number("grid.m", g.m, integer=True)
    if g.N is not None:
        _number("grid.N", g.N, integer=True)
    try:
        grid = cfg.build_grid()
    except ValueError as e:
        raise ConfigError("grid", str(e)) from None

    comps = cfg.advection.components
    if not isinstance(comps, list):
        raise ConfigError("advection.components", "expected a list of expressions")
    if comps and len(comps) != grid.ncomp:
        raise ConfigError("advection.components", f"{grid.kind} grids need {grid.ncomp} component(s)")
    for i, text in enumerate(comps):
        key = f"advection.components[{i}]"
        if not isinstance(text, str):
            raise ConfigError(key, "expected an expression string")
        try:
            check_variables(parse_expression(text), grid.kind)
        except ExprError as e:
            raise ConfigError(key, str(e)) from None
    try:
        check_peclet(grid, cfg.advection_field(grid), "c")
    except PecletError as e:
        raise ConfigError("advection.components", str(e)) from None
    except ExprError as e:
        raise ConfigError("advection.components", str(e)) from None

    s = cfg.solver
    _number("solver.lam", s.lam, lo=0)
    _number("solver.lam_step0", s.lam_step0, lo=0, lo_open=True)
    _number("solver.newton_tol", s.newton_tol, lo=0, hi=1e-8, lo_open=True)
    _number("solver.bracket_tol", s.bracket_tol, lo=0, hi=1e-2, lo_open=True)
    _number("solver.max_steps", s.max_steps, lo=1, integer=True)
    _number("spectral.eig_tol", cfg.spectral.eig_tol, lo=0, hi=1e-8, lo_open=True)
    _number("spectral.lam", cfg.spectral.lam, lo=0)

    v = cfg.verify
    if isinstance(v.beta, (int, float)):
        v.beta = [v.beta]
    if isinstance(v.t_fractions, (int, float)):
        v.t_fractions = [v.t_fractions]
    for i, b in enumerate(_list("verify.beta", v.beta)):
        _number(f"verify.beta[{i}]", b, lo=1, hi=2, lo_open=True, hi_open=True)
    for i, f in enumerate(_list("verify.t_fractions", v.t_fractions)):
        _number(f"verify.t_fractions[{i}]", f, lo=0, hi=1, lo_open=True, hi_open=True)
    _number("verify.psi_count", v.psi_count, lo=1, integer=True)
    _number("verify.seed", v.seed, lo=0, integer=True)

    _number("oracle.eta_grid", cfg.oracle.eta_grid, lo=100, integer=True)
    _number("oracle.max_step", cfg.oracle.max_step, lo=0, hi=1e-2, lo_open=True)

    o = cfg.output
    if not isinstance(o.directory, str) or not o.directory:
        raise ConfigError("output.directory", "expected a path")
    for f in _list("output.formats", o.formats):
        if f not in FORMATS:
            raise ConfigError("output.formats", f"unknown format {f!r}")


def loads(text: str) -> Config:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<parse>", f"{e.msg} at line {e.lineno}, column {e.colno}") from None
    return from_dict(data)


def load_config(path) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError("--config", str(e)) from None
    return loads(text)


def apply_override(data: dict, assignment: str) -> None:
    """Apply ``section.key=value`` to a raw config dict; value is JSON or a bare string."""
    if "=" not in assignment:
        raise ConfigError("--set", f"expected key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    if len(parts) != 2 or parts[0] not in _CLASSES:
        raise ConfigError(key, "override keys have the form section.key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    data.setdefault(parts[0], {})[parts[1]] = value
