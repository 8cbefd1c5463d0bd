"""Exponent fields, their sampled extrema, and the structural assumption checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .expr import Expr, ExprError, eval_expr, max_index, parse_expr
from .mesh import Mesh

__all__ = [
    "FieldError",
    "OnePointField",
    "TwoPointField",
    "QField",
    "FieldSet",
    "FieldExtrema",
    "Check",
    "AssumptionReport",
    "field_extrema",
    "q_from_mu",
    "critical_exponent",
    "check_r_admissible",
    "theta_interval",
    "validate_assumptions",
]

# rows of interior x all-node pair blocks evaluated at once
COARSE_STRIDE = 16
_CHUNK = 64


class FieldError(ValueError):
    def __init__(self, message, witness=None, value=None):
        super().__init__(message)
        self.witness = witness
        self.value = value


def _bindings(prefix: str, pts: np.ndarray) -> dict:
    pts = np.asarray(pts, dtype=float)
    return {f"{prefix}{k + 1}": pts[..., k] for k in range(pts.shape[-1])}


def _raw_eval(e: Expr, env: dict, shape) -> np.ndarray:
    with np.errstate(all="ignore"):
        val = e.evaluate(env)
    return np.broadcast_to(np.asarray(val, dtype=float), shape)


class OnePointField:
    """A field ``x -> value`` given by an expression in x1..xN."""

    def __init__(self, expr: Expr | str, label: str, N: int):
        if isinstance(expr, str):
            expr = parse_expr(expr, N)
        if any(v.startswith("y") for v in expr.variables()):
            raise ExprError(f"one-point field {label!r} may not depend on y")
        if max_index(expr) > N:
            raise ExprError(f"field {label!r} references a coordinate beyond N={N}")
        self.expr = expr
        self.label = label
        self.N = N

    @classmethod
    def constant(cls, value: float, label: str, N: int) -> "OnePointField":
        return cls(repr(float(value)), label, N)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        vals = _raw_eval(self.expr, _bindings("x", X), X.shape[:-1])
        if not np.all(np.isfinite(vals)):
            k = np.unravel_index(np.flatnonzero(~np.isfinite(vals))[0], vals.shape)
            raise FieldError(
                f"field {self.label} is not finite", witness=X[k].tolist(), value=float(vals[k])
            )
        return np.array(vals)

    def __repr__(self):
        return f"OnePointField({self.label}={self.expr})"


class TwoPointField:
    """A symmetric field ``(x, y) -> value``.

    The stored expression is symmetrized as ``(e(x, y) + e(y, x)) / 2``, which
    is exactly swap invariant in floating point.
    """

    def __init__(self, expr: Expr | str, label: str, N: int):
        if isinstance(expr, str):
            expr = parse_expr(expr, N)
        if max_index(expr) > N:
            raise ExprError(f"field {label!r} references a coordinate beyond N={N}")
        self.expr = expr
        self.label = label
        self.N = N

    @classmethod
    def constant(cls, value: float, label: str, N: int) -> "TwoPointField":
        return cls(repr(float(value)), label, N)

    def raw(self, X, Y) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        shape = np.broadcast_shapes(X.shape[:-1], Y.shape[:-1])
        env = _bindings("x", X) | _bindings("y", Y)
        return _raw_eval(self.expr, env, shape)

    def __call__(self, X, Y) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        vals = 0.5 * (self.raw(X, Y) + self.raw(Y, X))
        if not np.all(np.isfinite(vals)):
            k = np.unravel_index(np.flatnonzero(~np.isfinite(vals))[0], vals.shape)
            Xb, Yb = np.broadcast_arrays(X, Y)
            Xb = Xb.reshape(vals.shape + (X.shape[-1],))
            Yb = Yb.reshape(vals.shape + (Y.shape[-1],))
            raise FieldError(
                f"field {self.label} is not finite",
                witness=(Xb[k].tolist(), Yb[k].tolist()),
                value=float(vals[k]),
            )
        return vals

    def diagonal(self, X) -> np.ndarray:
        return self(X, X)

    def __repr__(self):
        return f"TwoPointField({self.label}={self.expr})"


class QField(TwoPointField):
    """The exponent q determined by 2/q + mu/N = 2, i.e. q = 2N / (2N - mu)."""

    def __init__(self, mu: TwoPointField, N: int):
        self.mu = mu
        self.expr = mu.expr
        self.label = "q"
        self.N = N

    def __call__(self, X, Y):
        with np.errstate(divide="ignore"):
            m = self.mu(X, Y)
            return 2.0 * self.N / (2.0 * self.N - m)

    def __repr__(self):
        return f"QField(2N/(2N-{self.mu.expr}))"


def q_from_mu(mu: TwoPointField, N: int) -> QField:
    return QField(mu, N)


@dataclass
class FieldSet:
    """Every exponent field of one problem instance."""

    N: int
    s: TwoPointField
    p: TwoPointField
    mu: TwoPointField
    alpha: OnePointField
    r: OnePointField
    theta: Optional[float] = None

    @classmethod
    def from_strings(cls, N, s, p, mu, alpha, r, theta=None) -> "FieldSet":
        return cls(
            N=N,
            s=TwoPointField(s, "s", N),
            p=TwoPointField(p, "p", N),
            mu=TwoPointField(mu, "mu", N),
            alpha=OnePointField(alpha, "alpha", N),
            r=OnePointField(r, "r", N),
            theta=theta,
        )

    @property
    def q(self) -> QField:
        return q_from_mu(self.mu, self.N)

    def beta(self) -> "DiagonalField":
        """beta(x) = p(x, x), the Lebesgue exponent used throughout the solver."""
        return DiagonalField(self.p)


class DiagonalField(OnePointField):
    def __init__(self, field2: TwoPointField):
        self.field2 = field2
        self.expr = field2.expr
        self.label = "beta"
        self.N = field2.N

    def __call__(self, X):
        return self.field2.diagonal(X)


@dataclass
class FieldExtrema:
    lo: float
    hi: float
    argmin: object = None
    argmax: object = None


def _pair_blocks(mesh: Mesh):
    """Yield (rows, cols) point blocks covering interior x all-node pairs.

    Columns are every node in natural grid order so neighbouring columns are
    grid neighbours.
    """
    cols = mesh.natural_grid.reshape(-1, mesh.N)
    rows = mesh.interior
    for start in range(0, len(rows), _CHUNK):
        yield rows[start : start + _CHUNK], cols


def field_extrema(f, mesh: Mesh, where: str = "all") -> FieldExtrema:
    """Sampled min and max of a field on the mesh.

    One-point fields are sampled at every node (``where="all"``) or interior
    node (``where="interior"``). Two-point fields are sampled at every pair
    with at least one interior node, which is where the quadrature ever
    evaluates them. Sampling under-approximates the sup and over-approximates
    the inf.
    """
    if isinstance(f, TwoPointField):
        lo, hi = np.inf, -np.inf
        amin = amax = None
        for rows, cols in _pair_blocks(mesh):
            vals = f(rows[:, None, :], cols[None, :, :])
            i, j = np.unravel_index(np.argmin(vals), vals.shape)
            if vals[i, j] < lo:
                lo, amin = float(vals[i, j]), (rows[i].tolist(), cols[j].tolist())
            i, j = np.unravel_index(np.argmax(vals), vals.shape)
            if vals[i, j] > hi:
                hi, amax = float(vals[i, j]), (rows[i].tolist(), cols[j].tolist())
        return FieldExtrema(lo, hi, amin, amax)
    pts = mesh.nodes if where == "all" else mesh.interior
    vals = f(pts)
    return FieldExtrema(
        float(vals.min()), float(vals.max()), pts[np.argmin(vals)].tolist(), pts[np.argmax(vals)].tolist()
    )


def _oscillation_ok(vals: np.ndarray, axis: int, h: float) -> tuple[bool, float, float]:
    """Neighbour oscillation against a coarse Lipschitz estimate.

    The estimate uses differences across ``COARSE_STRIDE`` cells. A jump J
    between neighbours inflates it only to J / (stride h), so with a stride
    above the factor 10 a jump still exceeds 10 h L and is flagged.
    """
    k = COARSE_STRIDE
    fine = np.abs(np.diff(vals, axis=axis))
    n = vals.shape[axis]
    if n <= k:
        return True, 0.0, 0.0
    a = np.take(vals, np.arange(0, n - k), axis=axis)
    b = np.take(vals, np.arange(k, n), axis=axis)
    lip = float(np.max(np.abs(b - a))) / (k * h)
    osc = float(fine.max())
    return osc <= 10.0 * h * lip + 1e-12, osc, lip


def _continuity(f, mesh: Mesh) -> tuple[bool, float, float]:
    grid = mesh.natural_grid
    results = []
    if isinstance(f, TwoPointField):
        for rows, _ in _pair_blocks(mesh):
            vals = f(rows.reshape((len(rows),) + (1,) * mesh.N + (mesh.N,)), grid[None])
            results += [_oscillation_ok(vals, ax + 1, mesh.h) for ax in range(mesh.N)]
    else:
        vals = f(grid)
        results += [_oscillation_ok(vals, ax, mesh.h) for ax in range(mesh.N)]
    return (
        all(ok for ok, _, _ in results),
        max(osc for _, osc, _ in results),
        max(lip for _, _, lip in results),
    )


def critical_exponent(p: TwoPointField, s: TwoPointField, x, N: int | None = None):
    """N p(x,x) / (N - s(x,x) p(x,x)); vectorized over the leading axes of x."""
    X = np.asarray(x, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1)
    N = N if N is not None else X.shape[-1]
    pd = p.diagonal(X)
    sd = s.diagonal(X)
    denom = N - sd * pd
    if np.any(denom <= 0):
        k = np.unravel_index(np.argmin(denom), np.shape(denom))
        raise FieldError(
            "s(x,x) p(x,x) >= N: critical exponent undefined (P1 violated)",
            witness=np.asarray(X)[k].tolist() if np.ndim(denom) else X.tolist(),
            value=float(np.asarray(sd * pd)[k]),
        )
    out = N * pd / denom
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class Check:
    name: str
    passed: bool
    witness: object = None
    value: Optional[float] = None
    detail: str = ""


@dataclass
class AssumptionReport:
    checks: list = field(default_factory=list)
    derived: dict = field(default_factory=dict)
    theta_interval: Optional[tuple] = None
    theta: Optional[float] = None
    mesh_summary: str = ""

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def table(self) -> str:
        lines = [f"# mesh: {self.mesh_summary}", "assumption\tstatus\twitness\tvalue\tdetail"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            value = "" if c.value is None else repr(c.value)
            witness = "" if c.witness is None else str(c.witness)
            lines.append(f"{c.name}\t{status}\t{witness}\t{value}\t{c.detail}")
        lines.append("")
        for key, val in self.derived.items():
            lines.append(f"{key}\t{val!r}")
        if self.theta_interval is not None:
            lo, hi = self.theta_interval
            lines.append(f"Theta_interval\t({lo!r}, {hi!r}]")
        if self.theta is not None:
            lines.append(f"Theta\t{self.theta!r}")
        return "\n".join(lines) + "\n"


def check_r_admissible(r: OnePointField, q: TwoPointField, p: TwoPointField, s: TwoPointField, mesh: Mesh):
    """Check r against p(x,x) <= r q- <= r q+ < p_s*(x) at every node, and r- > p+."""
    qx = field_extrema(q, mesh)
    px = field_extrema(p, mesh)
    rx = field_extrema(r, mesh)
    pts = mesh.nodes
    rv = r(pts)
    pd = p.diagonal(pts)
    checks = []

    lower = pd - rv * qx.lo
    k = int(np.argmax(lower))
    checks.append(
        Check(
            "M:p(x,x)<=r*q-",
            bool(lower[k] <= 0),
            pts[k].tolist(),
            float(rv[k] * qx.lo),
            f"p(x,x)={float(pd[k])!r}",
        )
    )
    try:
        ps = critical_exponent(p, s, pts, mesh.N)
        upper = rv * qx.hi - ps
        k = int(np.argmax(upper))
        checks.append(
            Check("M:r*q+<p_s*", bool(upper[k] < 0), pts[k].tolist(), float(rv[k] * qx.hi), f"p_s*={float(ps[k])!r}")
        )
    except FieldError as exc:
        checks.append(Check("M:r*q+<p_s*", False, exc.witness, exc.value, str(exc)))
    checks.append(
        Check("F1:r->p+", rx.lo > px.hi, rx.argmin, rx.lo, f"p+={px.hi!r}")
    )
    return checks


def theta_interval(r: OnePointField, p: TwoPointField, mesh: Mesh) -> tuple[float, float]:
    """Admissible (Theta_lo, Theta_hi] for the power family: (p+, 2 r-]."""
    p_hi = field_extrema(p, mesh).hi
    r_lo = field_extrema(r, mesh).lo
    if 2 * r_lo <= p_hi:
        raise FieldError(
            f"no admissible Theta: 2 r- = {2 * r_lo!r} <= p+ = {p_hi!r}", value=2 * r_lo
        )
    return p_hi, 2.0 * r_lo


def validate_assumptions(fields: FieldSet, mesh: Mesh) -> AssumptionReport:
    """Evaluate every structural hypothesis on the mesh; never raises for failures."""
    N = fields.N
    rep = AssumptionReport(mesh_summary=mesh.summary())
    ext = {}
    for name in ("s", "p", "mu", "alpha", "r"):
        f = getattr(fields, name)
        try:
            ext[name] = field_extrema(f, mesh)
        except FieldError as exc:
            rep.checks.append(Check(f"finite:{name}", False, exc.witness, exc.value, str(exc)))
    if len(ext) < 5:
        return rep
    for name, e in ext.items():
        rep.derived[f"{name}-"] = e.lo
        rep.derived[f"{name}+"] = e.hi

    s, p, mu, al, r = (ext[k] for k in ("s", "p", "mu", "alpha", "r"))
    rep.checks.append(Check("S1:s->0", s.lo > 0, s.argmin, s.lo))
    rep.checks.append(Check("S1:s+<1", s.hi < 1, s.argmax, s.hi))
    rep.checks.append(Check("P1:p->1", p.lo > 1, p.argmin, p.lo))
    rep.checks.append(
        Check("P1:s+p+<N", s.hi * p.hi < N, s.argmax, s.hi * p.hi, f"p+ at {p.argmax}")
    )
    rep.checks.append(Check("mu1:mu->0", mu.lo > 0, mu.argmin, mu.lo))
    rep.checks.append(Check("mu1:mu+<N", mu.hi < N, mu.argmax, mu.hi))
    for name in ("s", "p", "mu"):
        ok, osc, lip = _continuity(getattr(fields, name), mesh)
        rep.checks.append(
            Check(f"continuity:{name}", ok, None, osc, f"coarse Lipschitz estimate {lip!r}")
        )

    if mu.hi < N:
        q = field_extrema(fields.q, mesh)
        rep.derived["q-"] = q.lo
        rep.derived["q+"] = q.hi
        rep.checks.append(Check("q1:q-in-C+", 1 < q.lo <= q.hi < np.inf, q.argmin, q.lo))
    else:
        rep.checks.append(Check("q1:q-in-C+", False, mu.argmax, mu.hi, "mu+ >= N"))

    rep.checks.append(Check("alpha:alpha->1", al.lo > 1, al.argmin, al.lo))
    rep.checks.append(Check("alpha:alpha+<p-", al.hi < p.lo, al.argmax, al.hi, f"p-={p.lo!r}"))
    rep.checks.append(Check("r:r->1", r.lo > 1, r.argmin, r.lo))

    if mu.hi < N and s.hi * p.hi < N:
        rep.checks.extend(check_r_admissible(fields.r, fields.q, fields.p, fields.s, mesh))
    else:
        rep.checks.append(Check("F1:r->p+", r.lo > p.hi, r.argmin, r.lo, f"p+={p.hi!r}"))

    try:
        lo, hi = theta_interval(fields.r, fields.p, mesh)
        rep.theta_interval = (lo, hi)
        theta = fields.theta if fields.theta is not None else hi
        rep.theta = theta
        rep.checks.append(
            Check("F2:Theta", lo < theta <= hi, None, theta, f"admissible ({lo!r}, {hi!r}]")
        )
    except FieldError as exc:
        rep.checks.append(Check("F2:Theta", False, None, exc.value, str(exc)))
    return rep
