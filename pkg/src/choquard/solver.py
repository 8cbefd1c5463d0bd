"""Critical points of J_lambda: a mountain-pass point and a small-ball minimizer.

Both searches run in the Euclidean metric on nodal values, where a vanishing
gradient is exactly the discrete weak-solution condition. The mountain-pass
point is approached by deforming a discrete path at its energy maximum and
finished by Newton's method on the gradient, since plain descent leaves a
saddle along its unstable direction. The ball minimizer uses projected
descent with radial rescaling onto the norm ball.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .energy import EnergyBreakdown, Problem, signed_power
from .exponents import FieldSet, field_extrema
from .mesh import Mesh
from .sampling import bump, random_function, sample_rng

log = logging.getLogger(__name__)

__all__ = [
    "SolverError",
    "SolverParams",
    "SolverReport",
    "ConstantsReport",
    "PSSummary",
    "estimate_constants",
    "lambda_threshold",
    "fit_power_law",
    "mountain_pass",
    "ball_minimize",
    "ps_monitor",
    "projected_residual",
]

MAX_DOUBLINGS = 60


class SolverError(RuntimeError):
    pass


@dataclass
class SolverParams:
    lam: float = 0.0
    path_points: int = 21
    max_iter: int = 5000
    grad_tol: float = 1e-8
    step_init: float = 1.0
    backtrack: float = 0.5
    armijo_c: float = 1e-4
    seed: int = 7
    ball_radius: Optional[float] = None
    newton_switch: float = 1e-3  # relative gradient drop before Newton takes over

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.path_points < 3:
            raise ValueError("need at least 3 path points")
        if not 0 < self.backtrack < 1 or not 0 < self.armijo_c < 1:
            raise ValueError("backtrack and armijo_c must lie in (0, 1)")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")


@dataclass
class SolverReport:
    final_u: np.ndarray
    final_energy: EnergyBreakdown
    residual: float
    iterations: int
    history: list  # (J, residual, x0 norm) per iteration
    classification: str
    converged: bool
    x0_norm: float
    ps: Optional["PSSummary"] = None
    morse_index: Optional[int] = None
    notes: list = field(default_factory=list)

    def history_csv(self) -> str:
        lines = ["iter,J,residual,x0_norm"]
        lines += [f"{k},{J!r},{res!r},{nrm!r}" for k, (J, res, nrm) in enumerate(self.history)]
        return "\n".join(lines) + "\n"

    def solution_csv(self, mesh: Mesh) -> str:
        cols = [f"x{k + 1}" for k in range(mesh.N)]
        lines = [",".join(cols + ["u"])]
        for x, v in zip(mesh.interior, self.final_u):
            lines.append(",".join([repr(float(c)) for c in x] + [repr(float(v))]))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# constants and the lambda threshold


@dataclass
class ConstantsReport:
    """Sampled constants of the lower bound J >= (1/p+ - T_lam(||u||)) ||u||^p+."""

    c13: float
    c14: float
    alpha_lo: float
    p_hi: float
    r_lo: float
    samples: int
    seed: int
    Lambda: Optional[float] = None

    def T(self, lam: float, t):
        a = self.alpha_lo - self.p_hi
        b = 2 * self.r_lo - self.p_hi
        return self.c14 * lam / self.alpha_lo * t**a + self.c13 * t**b

    def t0(self, lam: float) -> float:
        """Minimizer of T_lam by golden-section search on log t."""
        if lam <= 0:
            return 0.0
        z = golden_section(lambda z: self.T(lam, math.exp(z)), -60.0, 60.0)
        return math.exp(z)

    def T_at_t0(self, lam: float) -> float:
        return self.T(lam, self.t0(lam)) if lam > 0 else 0.0

    def margin(self, lam: float, delta: Optional[float] = None) -> float:
        """1/p+ - T_lam(delta); positive means the sampled geometry certifies delta."""
        delta = self.t0(lam) if delta is None else delta
        return 1.0 / self.p_hi - self.T(lam, delta)

    def table(self) -> str:
        rows = [
            ("c13", self.c13),
            ("c14", self.c14),
            ("alpha-", self.alpha_lo),
            ("p+", self.p_hi),
            ("r-", self.r_lo),
            ("samples", self.samples),
            ("seed", self.seed),
        ]
        if self.Lambda is not None:
            rows += [("Lambda", self.Lambda)]
        return "".join(f"{k}\t{v!r}\n" for k, v in rows)


def golden_section(fn: Callable[[float], float], a: float, b: float, tol: float = 1e-12, max_iter: int = 500) -> float:
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(c) + abs(d)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def estimate_constants(fields: FieldSet, mesh: Mesh, samples: int = 200, seed: int = 7) -> ConstantsReport:
    """Sample c13 and c14 over functions normalized to unit X0 norm.

    The candidate set is the fixed bump followed by ``samples`` random
    functions. Smoothed noise alone sits far from the maximizers of both
    terms and underestimates the constants by orders of magnitude.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    prob = Problem(fields, mesh)
    al = field_extrema(fields.alpha, mesh)
    c13 = c14 = 0.0
    candidates = [bump(mesh)]
    candidates += [random_function(mesh, sample_rng(seed, k)) for k in range(samples)]
    for u in candidates:
        nrm = prob.x0_norm(u)
        if nrm == 0:
            continue
        u = u / nrm
        c14 = max(c14, al.lo * prob.concave_term(u, 1.0))
        c13 = max(c13, prob.choquard_term(u))
    return ConstantsReport(
        c13=c13,
        c14=c14,
        alpha_lo=al.lo,
        p_hi=field_extrema(fields.p, mesh).hi,
        r_lo=field_extrema(fields.r, mesh).lo,
        samples=samples,
        seed=seed,
    )


def lambda_threshold(constants: ConstantsReport):
    """Lambda solving T_lam(t0(lam)) = 1/p+, and lam -> delta_lam = t0(lam)."""
    c = constants
    if not (1 < c.alpha_lo < c.p_hi < c.r_lo):
        raise SolverError(
            f"exponent order alpha- < p+ < r- violated: {c.alpha_lo!r}, {c.p_hi!r}, {c.r_lo!r}"
        )
    target = 1.0 / c.p_hi
    lo, hi = 1e-8, 1.0
    while c.T_at_t0(lo) >= target:
        lo *= 1e-4
    while c.T_at_t0(hi) <= target:
        hi *= 1e4
    a, b = math.log(lo), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if c.T_at_t0(math.exp(mid)) < target:
            a = mid
        else:
            b = mid
        if b - a < 1e-14:
            break
    c.Lambda = math.exp(0.5 * (a + b))
    return c.Lambda, c.t0


def fit_power_law(constants: ConstantsReport, lam_lo: float = 1e-6, lam_hi: float = 1e-3, points: int = 13):
    """Log-log slope of lam -> T_lam(t0(lam)); returns (fitted slope, local slopes)."""
    lams = np.geomspace(lam_lo, lam_hi, points)
    vals = np.array([constants.T_at_t0(l) for l in lams])
    x, y = np.log(lams), np.log(vals)
    slope = float(np.polyfit(x, y, 1)[0])
    local = np.diff(y) / np.diff(x)
    return slope, local


# ---------------------------------------------------------------------------
# shared line search and Newton polish


def _armijo(fun, u, J0, g, direction, p: SolverParams, step: float, project=None):
    """Backtracking until sufficient decrease; returns (u_new, J_new, step) or None."""
    t = step
    for _ in range(80):
        cand = u + t * direction
        if project is not None:
            cand = project(cand)
        Jc = fun(cand)
        if np.isfinite(Jc) and Jc <= J0 + p.armijo_c * float(g @ (cand - u)):
            return cand, Jc, t
        t *= p.backtrack
    return None


def _newton(prob: Problem, u, lam, tol, max_iter=60, constraint=None):
    """Damped Newton on grad J = 0 with merit |grad J|^2."""
    g = prob.gradient(u, lam)
    res = float(np.linalg.norm(g))
    for _ in range(max_iter):
        if res <= tol:
            break
        H = prob.hessian(u, lam)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, -g, rcond=None)[0]
        t = 1.0
        while t > 1e-8:
            cand = u + t * step
            if constraint is None or constraint(cand):
                gc = prob.gradient(cand, lam)
                rc = float(np.linalg.norm(gc))
                if np.isfinite(rc) and rc < res * (1 - 1e-4 * t):
                    break
            t *= 0.5
        else:
            break
        u, g, res = cand, gc, rc
    return u, g, res


def _morse_index(prob: Problem, u, lam) -> int:
    H = prob.hessian(u, lam)
    H = 0.5 * (H + H.T)
    return int(np.sum(np.linalg.eigvalsh(H) < 0))


# ---------------------------------------------------------------------------
# mountain pass


def _refine_near(path, energies, k, fun, max_len):
    """Insert midpoints next to node k wherever a segment bulges above both ends."""
    for a in (k, k - 1):
        b = a + 1
        if a < 0 or b >= len(path) or len(path) >= max_len:
            continue
        mid = 0.5 * (path[a] + path[b])
        Jm = fun(mid)
        if Jm > max(energies[a], energies[b]):
            path.insert(b, mid)
            energies.insert(b, Jm)


def mountain_pass(params: SolverParams, fields: FieldSet, mesh: Mesh, prob: Optional[Problem] = None) -> SolverReport:
    prob = prob or Problem(fields, mesh)
    lam = params.lam
    fun = lambda v: prob.total(v, lam)

    xi = bump(mesh)
    t = 1.0
    for _ in range(MAX_DOUBLINGS):
        if fun(t * xi) < 0:
            break
        t *= 2.0
    else:
        raise SolverError("no negative-energy endpoint found within 60 doublings")
    phi = t * xi
    K = params.path_points
    path = [phi * (k / (K - 1)) for k in range(K)]
    energies = [fun(v) for v in path]
    if not np.all(np.isfinite(energies)):
        raise SolverError("non-finite energy along the initial path")

    history = []
    step = params.step_init
    g0 = None
    it = 0
    notes = []
    while it < params.max_iter:
        k = 1 + int(np.argmax(energies[1:-1]))
        if energies[k] <= 0:
            notes.append("path maximum dropped to non-positive energy: no mountain-pass geometry")
            break
        u = path[k]
        g = prob.gradient(u, lam)
        res = float(np.linalg.norm(g))
        g0 = g0 or res
        history.append((energies[k], res, prob.x0_norm(u)))
        if res <= max(params.grad_tol, params.newton_switch * g0):
            break
        found = _armijo(fun, u, energies[k], g, -g, params, step)
        if found is None:
            notes.append("path deformation stalled in line search")
            break
        path[k], energies[k], used = found
        step = min(params.step_init, used * 2.0)
        _refine_near(path, energies, k, fun, max_len=16 * K)
        it += 1

    k = 1 + int(np.argmax(energies[1:-1]))
    u, g, res = _newton(prob, path[k], lam, params.grad_tol)
    it += 1
    history.append((fun(u), res, prob.x0_norm(u)))
    morse = _morse_index(prob, u, lam)

    e = prob.energy(u, lam)
    converged = res <= params.grad_tol
    rep = SolverReport(
        final_u=u,
        final_energy=e,
        residual=res,
        iterations=it,
        history=history,
        classification="mountainPass",
        converged=converged,
        x0_norm=prob.x0_norm(u),
        morse_index=morse,
        notes=notes,
    )
    if morse < 1:
        rep.converged = False
        rep.notes.append("critical point is a local minimum, not a mountain pass")
    if e.total <= 0:
        rep.converged = False
        rep.notes.append("critical point has non-positive energy")
    rep.ps = ps_monitor(history)
    return rep


# ---------------------------------------------------------------------------
# ball minimization


def projected_residual(prob: Problem, u, g, delta: float, rtol: float = 1e-9) -> float:
    """Gradient norm, or its tangential part when u sits on the ball boundary
    and -g points outward."""
    nrm = prob.x0_norm(u)
    if nrm < delta * (1 - rtol):
        return float(np.linalg.norm(g))
    n = _modular_gradient(prob, u / nrm)
    n /= np.linalg.norm(n)
    gn = float(g @ n)
    if gn >= 0:
        return float(np.linalg.norm(g))
    return float(np.linalg.norm(g - gn * n))


def _modular_gradient(prob: Problem, v):
    # the gradient of ||u|| is parallel to that of rho at u / ||u||
    G = prob.G
    d = v[:, None] - v[None, :]
    out = 2.0 * (G.p_II * signed_power(d, G.p_II) * G.K_II).sum(axis=1)
    out += 2.0 * (G.p_IR * signed_power(v[:, None], G.p_IR) * G.K_IR).sum(axis=1)
    out += 2.0 * G.p_d * signed_power(v, G.p_d) * G.tail * prob.cv
    return out


def ball_minimize(params: SolverParams, fields: FieldSet, mesh: Mesh, prob: Optional[Problem] = None) -> SolverReport:
    prob = prob or Problem(fields, mesh)
    lam = params.lam
    delta = params.ball_radius
    if delta is None or delta <= 0:
        raise SolverError("ball_minimize needs a positive ball radius")
    fun = lambda v: prob.total(v, lam)

    def project(v):
        nrm = prob.x0_norm(v)
        return v * (delta / nrm) if nrm > delta else v

    phi = bump(mesh)
    t = delta / prob.x0_norm(phi)
    for _ in range(MAX_DOUBLINGS):
        if fun(t * phi) < 0:
            break
        t *= 0.5
    else:
        raise SolverError("no negative-energy start inside the ball within 60 halvings")
    u = t * phi
    J = fun(u)
    history = []
    step = params.step_init
    notes = []
    it = 0
    res = math.inf
    g = prob.gradient(u, lam)
    g0 = float(np.linalg.norm(g))
    while it < params.max_iter:
        res = projected_residual(prob, u, g, delta)
        history.append((J, res, prob.x0_norm(u)))
        if res <= params.grad_tol or res <= params.newton_switch * g0:
            break
        found = _armijo(fun, u, J, g, -g, params, step, project)
        if found is None:
            notes.append("projected descent stalled in line search")
            break
        u, J, used = found
        step = min(params.step_init, used * 2.0)
        g = prob.gradient(u, lam)
        it += 1

    if res > params.grad_tol and prob.x0_norm(u) < delta:
        inside = lambda v: prob.x0_norm(v) <= delta and fun(v) < 0
        # aim below the tolerance: the quadratic phase makes the extra digits cheap
        u, g, _ = _newton(prob, u, lam, 1e-3 * params.grad_tol, constraint=inside)
        J = fun(u)
        res = projected_residual(prob, u, g, delta)
        it += 1
        history.append((J, res, prob.x0_norm(u)))

    e = prob.energy(u, lam)
    nrm = prob.x0_norm(u)
    rep = SolverReport(
        final_u=u,
        final_energy=e,
        residual=res,
        iterations=it,
        history=history,
        classification="ballMinimum",
        converged=res <= params.grad_tol and e.total < 0 and nrm <= delta * (1 + 1e-9),
        x0_norm=nrm,
        morse_index=_morse_index(prob, u, lam),
        notes=notes,
    )
    rep.ps = ps_monitor(history)
    return rep


# ---------------------------------------------------------------------------
# Palais-Smale monitoring


@dataclass
class PSSummary:
    energy_oscillation: float  # max - min of J over the last half of the trace
    residual_first: float
    residual_last: float
    norm_growth: float  # last norm / norm at mid-trace
    cauchy: bool
    residual_vanishing: bool
    warning: Optional[str] = None


def ps_monitor(history, rtol: float = 1e-6) -> PSSummary:
    """Summarize a (J, residual, norm) trace along accepted iterates."""
    if not history:
        raise ValueError("empty history")
    J = np.array([h[0] for h in history], dtype=float)
    res = np.array([h[1] for h in history], dtype=float)
    nrm = np.array([h[2] for h in history], dtype=float)
    half = len(J) // 2
    tail = J[half:]
    osc = float(tail.max() - tail.min())
    cauchy = osc <= rtol * max(1.0, float(np.abs(J).max()))
    growth = float(nrm[-1] / nrm[half]) if nrm[half] > 0 else 1.0
    warning = None
    tail_norms = nrm[half:]
    steps = np.diff(tail_norms)
    energy_bounded = float(np.abs(tail).max()) <= 10 * max(1.0, float(np.abs(J[: max(half, 1)]).max()))
    # steady growth: increasing norms whose increments do not die out
    diverging = (
        len(steps) > 1
        and np.all(steps > 0)
        and growth >= 1.5
        and steps[-1] >= 0.5 * steps[0]
    )
    if diverging and energy_bounded:
        warning = "norms diverge while the energy stays bounded: not a Palais-Smale sequence"
    return PSSummary(
        energy_oscillation=osc,
        residual_first=float(res[0]),
        residual_last=float(res[-1]),
        norm_growth=growth,
        cauchy=bool(cauchy),
        residual_vanishing=bool(res[-1] <= res[0]),
        warning=warning,
    )
