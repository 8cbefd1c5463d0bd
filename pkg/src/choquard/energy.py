"""The Choquard energy J_lambda on the mesh, its gradient and Hessian.

The discrete energy is

    J(u) = sum_pairs |u_i - u_j|^p_ij / p_ij K_ij          (Gagliardo part)
           - lam * sum_i |u_i|^alpha_i / alpha_i * h^N       (concave part)
           - 1/2 * sum_{i, j} F_i F_j M_ij                   (Choquard part)

with the pair conventions of :mod:`choquard.vxnorm`. The gradient is taken
against cell indicators, so it is the exact derivative of this sum.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from . import _reduce
from .exponents import FieldSet, OnePointField, TwoPointField
from .kernels import choquard_tables, gagliardo_tables
from .mesh import Mesh
from .vxnorm import x0_norm

__all__ = [
    "NonlinearitySpec",
    "EnergyBreakdown",
    "Problem",
    "F_of",
    "f_of",
    "choquard_term",
    "energy",
    "gradient",
    "apply_operator",
    "simon_check",
    "signed_power",
]


def signed_power(t, e):
    """|t|^(e-1) t, i.e. |t|^(p-2) t for e = p; zero at t = 0."""
    t = np.asarray(t, dtype=float)
    return np.sign(t) * np.abs(t) ** (e - 1.0)


@dataclass(frozen=True)
class NonlinearitySpec:
    """The power family f(x, t) = |t|^(r(x)-2) t, F(x, t) = |t|^r(x) / r(x)."""

    r: OnePointField
    theta: float
    M: float = 1.0
    family: str = "power"


def F_of(x, t, spec: NonlinearitySpec):
    rv = spec.r(np.atleast_2d(np.asarray(x, dtype=float)))
    out = np.abs(t) ** rv / rv
    return float(out[0]) if np.ndim(t) == 0 and out.size == 1 else out


def f_of(x, t, spec: NonlinearitySpec):
    rv = spec.r(np.atleast_2d(np.asarray(x, dtype=float)))
    out = signed_power(t, rv)
    return float(out[0]) if np.ndim(t) == 0 and out.size == 1 else out


@dataclass(frozen=True)
class EnergyBreakdown:
    lam: float
    gagliardo: float
    concave: float
    choquard: float

    @property
    def total(self) -> float:
        return self.gagliardo - self.concave - self.choquard

    CSV_HEADER = "lambda,gagliardo,concave,choquard,total"

    def csv_row(self) -> str:
        return ",".join(repr(float(v)) for v in (self.lam, self.gagliardo, self.concave, self.choquard, self.total))


class Problem:
    """A field set discretized on a mesh; every energy routine hangs off this."""

    def __init__(self, fields: FieldSet, mesh: Mesh):
        if fields.N != mesh.N:
            raise ValueError(f"fields are for N={fields.N} but the mesh has N={mesh.N}")
        self.fields = fields
        self.mesh = mesh
        self.G = gagliardo_tables(mesh, fields.s, fields.p)
        self.C = choquard_tables(mesh, fields.mu)
        I = mesh.interior
        self.alpha = fields.alpha(I)
        self.r = fields.r(I)
        self.cv = mesh.cell_volume
        self.n = mesh.n_inside

    # -- pieces ---------------------------------------------------------
    def _F(self, u):
        return np.abs(u) ** self.r / self.r

    def _f(self, u):
        return signed_power(u, self.r)

    def gagliardo_term(self, u) -> float:
        G = self.G

        def rows(sl):
            ui = u[sl]
            d = np.abs(ui[:, None] - u[None, :])
            a = np.abs(ui)
            out = (d ** G.p_II[sl] / G.p_II[sl] * G.K_II[sl]).sum(axis=1)
            out += 2.0 * (a[:, None] ** G.p_IR[sl] / G.p_IR[sl] * G.K_IR[sl]).sum(axis=1)
            out += 2.0 * a ** G.p_d[sl] / G.p_d[sl] * G.tail[sl] * self.cv
            return out

        return _reduce.total(_reduce.row_values(rows, self.n))

    def concave_term(self, u, lam: float) -> float:
        if lam == 0:
            return 0.0
        return lam * _reduce.total(np.abs(u) ** self.alpha / self.alpha) * self.cv

    def choquard_potential(self, u) -> np.ndarray:
        """(sum_j F_j M_ij)_i over interior rows."""
        F = self._F(u)
        K = self.C.K
        return _reduce.row_values(lambda sl: (K[sl] * F[None, :]).sum(axis=1), self.n)

    def choquard_term(self, u) -> float:
        return 0.5 * _reduce.total(self._F(u) * self.choquard_potential(u))

    # -- public ---------------------------------------------------------
    def energy(self, u, lam: float = 0.0) -> EnergyBreakdown:
        u = np.asarray(u, dtype=float)
        return EnergyBreakdown(lam, self.gagliardo_term(u), self.concave_term(u, lam), self.choquard_term(u))

    def total(self, u, lam: float = 0.0) -> float:
        return self.energy(u, lam).total

    def gradient(self, u, lam: float = 0.0) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        G = self.G

        def rows(sl):
            ui = u[sl]
            d = ui[:, None] - u[None, :]
            out = 2.0 * (signed_power(d, G.p_II[sl]) * G.K_II[sl]).sum(axis=1)
            out += 2.0 * (signed_power(ui[:, None], G.p_IR[sl]) * G.K_IR[sl]).sum(axis=1)
            out += 2.0 * signed_power(ui, G.p_d[sl]) * G.tail[sl] * self.cv
            return out

        g = _reduce.row_values(rows, self.n)
        if lam:
            g -= lam * signed_power(u, self.alpha) * self.cv
        g -= self.choquard_potential(u) * self._f(u)
        return g

    def hessian(self, u, lam: float = 0.0) -> np.ndarray:
        """Second derivative matrix; entries with p < 2 at a zero difference are capped."""
        u = np.asarray(u, dtype=float)
        G = self.G
        big = 1e300
        with np.errstate(divide="ignore", invalid="ignore"):
            d = u[:, None] - u[None, :]
            c = 2.0 * (G.p_II - 1.0) * np.abs(d) ** (G.p_II - 2.0) * G.K_II
            c = np.nan_to_num(c, nan=0.0, posinf=big)
            H = -c
            diag = c.sum(axis=1)
            diag += 2.0 * ((G.p_IR - 1.0) * np.abs(u)[:, None] ** (G.p_IR - 2.0) * G.K_IR).sum(axis=1)
            diag += 2.0 * (G.p_d - 1.0) * np.abs(u) ** (G.p_d - 2.0) * G.tail * self.cv
            if lam:
                diag -= lam * (self.alpha - 1.0) * np.abs(u) ** (self.alpha - 2.0) * self.cv
            f = self._f(u)
            fp = (self.r - 1.0) * np.abs(u) ** (self.r - 2.0)
            H -= np.outer(f, f) * self.C.K
            diag -= fp * self.choquard_potential(u)
        H[np.diag_indices_from(H)] += np.nan_to_num(diag, nan=0.0, posinf=big, neginf=-big)
        return H

    def apply_operator(self, u, i: int) -> float:
        return apply_operator(u, i, self.fields.s, self.fields.p, self.mesh)

    def x0_norm(self, u) -> float:
        return x0_norm(u, self.fields.s, self.fields.p, self.mesh)


_problems: "weakref.WeakKeyDictionary[Mesh, dict]" = weakref.WeakKeyDictionary()


def _problem(fields: FieldSet, mesh: Mesh) -> Problem:
    slot = _problems.setdefault(mesh, {})
    key = (fields.s, fields.p, fields.mu, fields.alpha, fields.r)
    if key not in slot:
        slot[key] = Problem(fields, mesh)
    return slot[key]


def choquard_term(u, mu: TwoPointField, spec: NonlinearitySpec, mesh: Mesh) -> float:
    """Half the Omega x Omega sum of F(x,u(x)) F(y,u(y)) |x-y|^-mu, diagonal cells included exactly."""
    K = choquard_tables(mesh, mu).K
    u = np.asarray(u, dtype=float)
    rv = spec.r(mesh.interior)
    F = np.abs(u) ** rv / rv
    return 0.5 * _reduce.total(F * (K * F[None, :]).sum(axis=1))


def energy(u, lam: float, fields: FieldSet, mesh: Mesh) -> EnergyBreakdown:
    return _problem(fields, mesh).energy(u, lam)


def gradient(u, lam: float, fields: FieldSet, mesh: Mesh) -> np.ndarray:
    return _problem(fields, mesh).gradient(u, lam)


def apply_operator(u, i: int, s: TwoPointField, p: TwoPointField, mesh: Mesh) -> float:
    """Principal-value operator at interior node ``i``: punctured sum over all nodes plus tail."""
    T = gagliardo_tables(mesh, s, p)
    if not 0 <= i < mesh.n_inside:
        raise IndexError(f"node {i} is not an interior node")
    u = np.asarray(u, dtype=float)
    val = _reduce.total(signed_power(u[i] - u, T.p_II[i]) * T.K_II[i])
    val += _reduce.total(signed_power(u[i], T.p_IR[i]) * T.K_IR[i])
    return val / mesh.cell_volume + float(signed_power(u[i], T.p_d[i]) * T.tail[i])


def simon_check(a, b, p: float, slack: float = 1e-12):
    """Evaluate Simon's inequality for vectors a, b; returns (lhs, rhs, passed)."""
    if p <= 1:
        raise ValueError("simon_check needs p > 1")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    lhs = float(np.linalg.norm(a - b) ** p)
    ja = na ** (p - 2) * a if na > 0 else np.zeros_like(a)
    jb = nb ** (p - 2) * b if nb > 0 else np.zeros_like(b)
    inner = float(np.dot(ja - jb, a - b))
    if p < 2:
        if na == 0 and nb == 0:
            return 0.0, 0.0, True
        rhs = max(inner, 0.0) ** (p / 2) * (na**p + nb**p) ** ((2 - p) / 2) / (p - 1)
    else:
        rhs = 2.0**p * inner
    return lhs, float(rhs), lhs <= rhs + slack
