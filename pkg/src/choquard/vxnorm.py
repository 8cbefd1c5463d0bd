"""Variable-exponent modulars and Luxemburg norms on the mesh.

A grid function is a 1-d array of values at the interior nodes, in
``mesh.interior`` order; it is zero on the ring and beyond by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _reduce
from .exponents import OnePointField, TwoPointField, field_extrema
from .kernels import GagliardoTables, gagliardo_tables
from .mesh import Mesh

__all__ = [
    "NormError",
    "lebesgue_modular",
    "luxemburg_norm",
    "gagliardo_modular",
    "gagliardo_modular_restricted",
    "x0_norm",
    "solve_unit_modular",
    "check_modular_norm",
    "ModularNormReport",
    "power_norm_bound",
    "PowerNormReport",
]

BISECT_TOL = 1e-12
BISECT_MAXITER = 200


class NormError(ValueError):
    pass


def _exponent_values(beta, mesh: Mesh) -> np.ndarray:
    if isinstance(beta, (OnePointField, TwoPointField)):
        return beta(mesh.interior) if isinstance(beta, OnePointField) else beta.diagonal(mesh.interior)
    vals = np.asarray(beta, dtype=float)
    return np.broadcast_to(vals, (mesh.n_inside,))


def lebesgue_modular(u, beta, mesh: Mesh) -> float:
    """Sum of |u|^beta times the cell volume over interior nodes."""
    b = _exponent_values(beta, mesh)
    return _reduce.total(np.abs(u) ** b) * mesh.cell_volume


def solve_unit_modular(
    modular: Callable[[float], float],
    tol: float = BISECT_TOL,
    max_iter: int = BISECT_MAXITER,
) -> float:
    """Find lam > 0 with ``modular(lam) == 1`` for a strictly decreasing modular.

    Bisection on log(lam), starting from [1e-12, 1e12] and widening the
    bracket geometrically until it straddles 1.
    """
    lo, hi = 1e-12, 1e12
    while modular(lo) < 1:
        lo *= 1e-6
        if lo < 1e-300:
            raise NormError("cannot bracket the unit modular from below")
    while modular(hi) > 1:
        hi *= 1e6
        if hi > 1e300:
            raise NormError("cannot bracket the unit modular from above")
    a, b = math.log(lo), math.log(hi)
    best, best_err = math.exp(0.5 * (a + b)), math.inf
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        lam = math.exp(mid)
        m = modular(lam)
        err = abs(m - 1.0)
        if err < best_err:
            best, best_err = lam, err
        if err <= tol:
            break
        if m > 1.0:
            a = mid
        else:
            b = mid
        if b - a <= 4 * np.finfo(float).eps * max(1.0, abs(a)):
            break
    return best


def luxemburg_norm(u, beta, mesh: Mesh, tol: float = BISECT_TOL) -> float:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NormError("grid function has non-finite values")
    if not np.any(u):
        return 0.0
    b = _exponent_values(beta, mesh)
    a = np.abs(u)
    cv = mesh.cell_volume
    return solve_unit_modular(lambda lam: _reduce.total((a / lam) ** b) * cv, tol)


def _gagliardo_rows(u: np.ndarray, T: GagliardoTables) -> np.ndarray:
    def rows(sl):
        ui = u[sl]
        d = np.abs(ui[:, None] - u[None, :])
        a = np.abs(ui)
        out = (d ** T.p_II[sl] * T.K_II[sl]).sum(axis=1)
        out += 2.0 * (a[:, None] ** T.p_IR[sl] * T.K_IR[sl]).sum(axis=1)
        out += 2.0 * a ** T.p_d[sl] * T.tail[sl] * T.cv
        return out

    return _reduce.row_values(rows, len(u))


def gagliardo_modular(u, s: TwoPointField, p: TwoPointField, mesh: Mesh) -> float:
    """Punctured midpoint approximation of the Gagliardo modular over Q.

    Pairs inside Omega x Omega are summed directly, Omega x ring pairs count
    twice (both orderings), and the region beyond the ring is the analytic
    radial tail, also counted for both orderings.
    """
    T = gagliardo_tables(mesh, s, p)
    return _reduce.total(_gagliardo_rows(np.asarray(u, dtype=float), T))


def gagliardo_modular_restricted(u, s, p, mesh: Mesh, keep: np.ndarray) -> float:
    """Pair sum restricted to node pairs with both nodes flagged in ``keep``.

    ``keep`` is a boolean flag per node in ``mesh.nodes`` order. No tail is
    added, so for keep1 <= keep2 the result is monotone.
    """
    T = gagliardo_tables(mesh, s, p)
    u = np.asarray(u, dtype=float)
    kI, kR = keep[: mesh.n_inside], keep[mesh.n_inside :]
    d = np.abs(u[:, None] - u[None, :])
    II = d ** T.p_II * T.K_II * (kI[:, None] & kI[None, :])
    IR = np.abs(u)[:, None] ** T.p_IR * T.K_IR * (kI[:, None] & kR[None, :])
    return _reduce.total(II.sum(axis=1) + 2.0 * IR.sum(axis=1))


def x0_norm(u, s: TwoPointField, p: TwoPointField, mesh: Mesh, tol: float = BISECT_TOL) -> float:
    """Luxemburg norm built on the Gagliardo modular."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NormError("grid function has non-finite values")
    if not np.any(u):
        return 0.0
    T = gagliardo_tables(mesh, s, p)
    return solve_unit_modular(lambda lam: _reduce.total(_gagliardo_rows(u / lam, T)), tol)


@dataclass
class ModularNormReport:
    norm: float
    rho: float
    p_lo: float
    p_hi: float
    trichotomy: bool
    bounds: bool

    @property
    def passed(self) -> bool:
        return self.trichotomy and self.bounds


def check_modular_norm(u, s, p, mesh: Mesh, rtol: float = 1e-9) -> ModularNormReport:
    """Check the norm/modular trichotomy and the power bounds between them."""
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        raise NormError("check_modular_norm needs a nonzero function")
    ext = field_extrema(p, mesh)
    n = x0_norm(u, s, p, mesh)
    rho = gagliardo_modular(u, s, p, mesh)
    tri = (n - 1.0) * (rho - 1.0) >= 0 or min(abs(n - 1.0), abs(rho - 1.0)) <= rtol
    if n > 1:
        lo, hi = n**ext.lo, n**ext.hi
    else:
        lo, hi = n**ext.hi, n**ext.lo
    bounds = lo * (1 - rtol) <= rho <= hi * (1 + rtol)
    return ModularNormReport(n, rho, ext.lo, ext.hi, bool(tri), bool(bounds))


@dataclass
class PowerNormReport:
    lhs: float
    rhs: float
    nu1_lo: float
    nu1_hi: float
    passed: bool
    witness: object = None


def power_norm_bound(u, nu1: OnePointField, nu2: OnePointField, mesh: Mesh, rtol: float = 1e-9) -> PowerNormReport:
    """Check || |u|^nu1 ||_{nu2} <= ||u||_{nu1 nu2}^{nu1-} + ||u||_{nu1 nu2}^{nu1+}."""
    pts = mesh.interior
    a1, a2 = nu1(pts), nu2(pts)
    prod = a1 * a2
    if np.any(a1 < 0) or not np.any(a1 > 0):
        k = int(np.argmin(a1))
        raise NormError(f"nu1 must be >= 0 and not identically 0 (nu1={a1[k]!r} at {pts[k].tolist()})")
    if np.any(prod < 1):
        k = int(np.argmin(prod))
        raise NormError(f"nu1*nu2 >= 1 violated (value {prod[k]!r} at {pts[k].tolist()})")
    u = np.asarray(u, dtype=float)
    lhs = luxemburg_norm(np.abs(u) ** a1, a2, mesh)
    base = luxemburg_norm(u, prod, mesh)
    lo, hi = float(a1.min()), float(a1.max())
    rhs = base**lo + base**hi if base > 0 else 0.0
    return PowerNormReport(lhs, rhs, lo, hi, lhs <= rhs * (1 + rtol))
