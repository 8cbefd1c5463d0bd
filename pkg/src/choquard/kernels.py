"""Precomputed pair tables for the midpoint quadrature.

Rows are interior nodes. Columns are interior nodes (``*_II``, Omega x Omega)
or ring nodes (``*_IR``). Kernel entries already carry the pair weight
``h^(2N)``. The Gagliardo kernel vanishes on the diagonal (punctured); the
Choquard kernel carries the exact self-interaction of each cell there.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .exponents import TwoPointField
from .mesh import Mesh, sphere_measure

__all__ = [
    "GagliardoTables",
    "ChoquardTables",
    "gagliardo_tables",
    "choquard_tables",
    "tail_factor",
    "cell_self_integral",
]


def _distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1))


def tail_factor(mesh: Mesh, sd: np.ndarray, pd: np.ndarray) -> np.ndarray:
    """Far-field integral of |x-y|^(-N-sp) over |x-y| > R_pad with s, p frozen at (x, x)."""
    sp = sd * pd
    return sphere_measure(mesh.N) * mesh.tail_radius ** (-sp) / sp


@lru_cache(maxsize=4096)
def _unit_cell_integral(N: int, mu: float) -> float:
    # integral of |x-y|^-mu over the unit cube squared
    if N == 1:
        return 2.0 / ((1.0 - mu) * (2.0 - mu))
    # difference density (1-|a|)(1-|b|) on [-1,1]^2, in polar coordinates over
    # the triangle 0 <= theta <= pi/4 of the first quadrant (8-fold symmetry)
    def radial(theta):
        c, s = math.cos(theta), math.sin(theta)
        rmax = 1.0 / c
        return quad(lambda r: (1 - r * c) * (1 - r * s) * r ** (1.0 - mu), 0.0, rmax, epsabs=1e-14, epsrel=1e-12)[0]

    return 8.0 * quad(radial, 0.0, math.pi / 4, epsabs=1e-14, epsrel=1e-12)[0]


def cell_self_integral(N: int, mu, h: float):
    """Exact double integral of |x-y|^-mu over one cell of side h against itself."""
    mu = np.asarray(mu, dtype=float)
    S = np.vectorize(lambda m: _unit_cell_integral(N, float(m)))(mu)
    return S * h ** (2 * N - mu)


@dataclass(frozen=True, eq=False)
class GagliardoTables:
    mesh: Mesh
    p_II: np.ndarray
    K_II: np.ndarray
    p_IR: np.ndarray
    K_IR: np.ndarray
    p_d: np.ndarray  # p(x, x) at interior nodes
    tail: np.ndarray  # tail_factor at interior nodes, without the cell volume

    @property
    def cv(self) -> float:
        return self.mesh.cell_volume


@dataclass(frozen=True, eq=False)
class ChoquardTables:
    mesh: Mesh
    K: np.ndarray  # |x-y|^(-mu) h^(2N) off the diagonal, cell self-integral on it


_cache: "weakref.WeakKeyDictionary[Mesh, dict]" = weakref.WeakKeyDictionary()


def _memo(mesh, key, build):
    slot = _cache.setdefault(mesh, {})
    if key not in slot:
        slot[key] = build()
    return slot[key]


def gagliardo_tables(mesh: Mesh, s: TwoPointField, p: TwoPointField) -> GagliardoTables:
    def build():
        N = mesh.N
        w = mesh.cell_volume**2
        I, R = mesh.interior, mesh.ring

        def block(B, puncture):
            d = _distances(I, B)
            sv = s(I[:, None, :], B[None, :, :])
            pv = p(I[:, None, :], B[None, :, :])
            with np.errstate(divide="ignore"):
                K = d ** (-N - sv * pv) * w
            if puncture:
                np.fill_diagonal(K, 0.0)
            return pv, K

        p_II, K_II = block(I, True)
        p_IR, K_IR = block(R, False)
        sd, pd = s.diagonal(I), p.diagonal(I)
        return GagliardoTables(mesh, p_II, K_II, p_IR, K_IR, pd, tail_factor(mesh, sd, pd))

    return _memo(mesh, ("gagliardo", s, p), build)


def choquard_tables(mesh: Mesh, mu: TwoPointField) -> ChoquardTables:
    def build():
        I = mesh.interior
        d = _distances(I, I)
        mv = mu(I[:, None, :], I[None, :, :])
        with np.errstate(divide="ignore"):
            K = d ** (-mv) * mesh.cell_volume**2
        np.fill_diagonal(K, cell_self_integral(mesh.N, np.diagonal(mv), mesh.h))
        return ChoquardTables(mesh, K)

    return _memo(mesh, ("choquard", mu), build)
