"""Run configuration: a TOML file with string-valued expressions.

Example::

    dimension = 1
    seed = 7

    [domain]
    shape = "box"
    lo = [0.0]
    hi = [1.0]

    [mesh]
    n = 64

    [fields]
    s = "min(0.3 + 0.1*abs(x1 - y1), 0.4)"
    p = "2 + 0.2*sin(pi*x1)*sin(pi*y1)"
    mu = "0.5"
    alpha = "1.5"
    r = "2.5"
    theta = 5.0

    [lambda]
    fraction = 0.25      # of the sampled threshold; or `value = ...`
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exponents import FieldError, FieldSet, OnePointField, TwoPointField
from .expr import ExprError
from .mesh import DomainSpec, MeshError
from .solver import SolverParams

__all__ = ["ConfigError", "VerifyParams", "LambdaSpec", "Config", "load_config", "parse_config"]

DEFAULT_N = {1: 64, 2: 32}
FIELD_KEYS = ("s", "p", "mu", "alpha", "r")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class VerifyParams:
    samples: int = 200
    gamma: Optional[str] = None  # embedding exponent; defaults to r
    radii: tuple = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0)
    samples_per_radius: int = 20
    fit_lo: float = 1e-6
    fit_hi: float = 1e-3


@dataclass
class LambdaSpec:
    """Either absolute values or fractions of the sampled threshold Lambda."""

    values: tuple
    relative: bool
    sweep: bool

    def resolve(self, Lambda: Optional[float]) -> list:
        if not self.relative:
            return list(self.values)
        if Lambda is None:
            raise ValueError("relative lambda needs the threshold")
        return [f * Lambda for f in self.values]


@dataclass
class Config:
    N: int
    domain: DomainSpec
    n: int
    pad_factor: float
    expressions: dict
    fields: FieldSet
    lam: LambdaSpec
    solver: SolverParams = field(default_factory=SolverParams)
    verify: VerifyParams = field(default_factory=VerifyParams)
    constant_samples: int = 200
    out: Path = Path("out")
    seed: int = 7
    source: Optional[Path] = None


def _get(tree: dict, key: str, path: str, kind, default=None, required=False):
    if key not in tree:
        if required:
            raise ConfigError(f"{path}{key}", "missing mandatory key")
        return default
    val = tree[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ConfigError(f"{path}{key}", f"expected {names}, got {type(val).__name__}")
    return val


def _table(tree: dict, key: str) -> dict:
    sub = tree.get(key, {})
    if not isinstance(sub, dict):
        raise ConfigError(key, "expected a table")
    return sub


def _known(tree: dict, keys, path: str):
    for k in tree:
        if k not in keys:
            raise ConfigError(f"{path}{k}", "unknown key")


def _domain(tree: dict, N: int) -> DomainSpec:
    d = _table(tree, "domain")
    _known(d, ("shape", "lo", "hi", "center", "radius"), "domain.")
    shape = _get(d, "shape", "domain.", str, "box")
    try:
        if shape == "box":
            lo = _get(d, "lo", "domain.", list, [0.0] * N)
            hi = _get(d, "hi", "domain.", list, [1.0] * N)
            spec = DomainSpec.box(lo, hi)
        elif shape == "ball":
            c = _get(d, "center", "domain.", list, required=True)
            R = _get(d, "radius", "domain.", float, required=True)
            spec = DomainSpec.ball(c, R)
        else:
            raise ConfigError("domain.shape", f"unknown shape {shape!r} (box or ball)")
    except (MeshError, TypeError) as exc:
        raise ConfigError("domain", str(exc)) from exc
    if spec.N != N:
        raise ConfigError("domain", f"domain has dimension {spec.N}, config says {N}")
    return spec


def _lambda(tree: dict) -> LambdaSpec:
    t = _table(tree, "lambda")
    _known(t, ("value", "fraction", "sweep", "sweep_fractions"), "lambda.")
    given = [k for k in ("value", "fraction", "sweep", "sweep_fractions") if k in t]
    if len(given) > 1:
        raise ConfigError("lambda", f"{' and '.join(given)} are mutually exclusive")
    if not given:
        return LambdaSpec((0.25,), relative=True, sweep=False)
    key = given[0]
    if key in ("value", "fraction"):
        v = _get(t, key, "lambda.", float)
        vals = (v,)
    else:
        raw = _get(t, key, "lambda.", list)
        if not raw:
            raise ConfigError(f"lambda.{key}", "empty list")
        try:
            vals = tuple(float(x) for x in raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"lambda.{key}", "entries must be numbers") from exc
    if any(v < 0 for v in vals):
        raise ConfigError(f"lambda.{key}", "lambda must be non-negative")
    return LambdaSpec(vals, relative=key in ("fraction", "sweep_fractions"), sweep=key.startswith("sweep"))


def _dataclass_section(tree: dict, name: str, cls, skip=()):
    t = _table(tree, name)
    names = {f.name: f for f in dc_fields(cls) if f.name not in skip}
    _known(t, names, f"{name}.")
    kw = {}
    for k, v in t.items():
        default = getattr(cls(), k)
        if isinstance(default, tuple):
            kw[k] = tuple(_get(t, k, f"{name}.", list))
        elif isinstance(default, bool):
            kw[k] = _get(t, k, f"{name}.", bool)
        elif isinstance(default, int):
            kw[k] = _get(t, k, f"{name}.", int)
        elif isinstance(default, float):
            kw[k] = _get(t, k, f"{name}.", float)
        else:
            kw[k] = v
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, str(exc)) from exc


def parse_config(tree: dict, source: Optional[Path] = None) -> Config:
    """Validate a parsed TOML tree and fill in defaults."""
    _known(
        tree,
        ("dimension", "seed", "out", "domain", "mesh", "fields", "lambda", "solver", "verify", "constants"),
        "",
    )
    N = _get(tree, "dimension", "", int, required=True)
    if N not in (1, 2):
        raise ConfigError("dimension", f"supported dimensions are 1 and 2, got {N}")
    seed = _get(tree, "seed", "", int, 7)
    domain = _domain(tree, N)

    m = _table(tree, "mesh")
    _known(m, ("n", "pad_factor"), "mesh.")
    n = _get(m, "n", "mesh.", int, DEFAULT_N[N])
    pad = _get(m, "pad_factor", "mesh.", float, 4.0)
    if n < 4:
        raise ConfigError("mesh.n", "need at least 4 cells per axis")
    if pad <= 0:
        raise ConfigError("mesh.pad_factor", "must be positive")

    f = _table(tree, "fields")
    _known(f, FIELD_KEYS + ("theta",), "fields.")
    exprs = {}
    for k in FIELD_KEYS:
        v = _get(f, k, "fields.", (str, int, float), required=True)
        exprs[k] = str(v)
    theta = _get(f, "theta", "fields.", float)
    built = {}
    for k in FIELD_KEYS:
        kind = OnePointField if k in ("alpha", "r") else TwoPointField
        try:
            built[k] = kind(exprs[k], k, N)
        except (ExprError, FieldError) as exc:
            raise ConfigError(f"fields.{k}", str(exc)) from exc
    fs = FieldSet(N=N, theta=theta, **built)

    solver = _dataclass_section(tree, "solver", SolverParams, skip=("lam", "ball_radius", "seed"))
    solver.seed = seed
    verify = _dataclass_section(tree, "verify", VerifyParams)
    c = _table(tree, "constants")
    _known(c, ("samples",), "constants.")
    csamples = _get(c, "samples", "constants.", int, 200)

    out = Path(_get(tree, "out", "", str, "out"))
    return Config(
        N=N,
        domain=domain,
        n=n,
        pad_factor=pad,
        expressions=exprs,
        fields=fs,
        lam=_lambda(tree),
        solver=solver,
        verify=verify,
        constant_samples=csamples,
        out=out,
        seed=seed,
        source=source,
    )


def load_config(path) -> Config:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(str(path), "config file not found")
    try:
        with path.open("rb") as fh:
            tree = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"TOML parse error: {exc}") from exc
    return parse_config(tree, source=path)
