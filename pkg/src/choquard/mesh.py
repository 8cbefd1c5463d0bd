"""Uniform cell-centred grids over a bounded domain plus a complement ring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["DomainSpec", "Mesh", "MeshError", "build_mesh", "pair_weight", "sphere_measure"]


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """A box ``[lo, hi]`` or a ball ``|x - center| < radius`` in R^N, N in {1, 2}."""

    N: int
    shape: str = "box"
    lo: tuple = (0.0,)
    hi: tuple = (1.0,)
    center: tuple = (0.0,)
    radius: float = 1.0

    def __post_init__(self):
        if self.N not in (1, 2):
            raise MeshError(f"only N in (1, 2) is supported, got {self.N}")
        if self.shape == "box":
            if len(self.lo) != self.N or len(self.hi) != self.N:
                raise MeshError("box corners must have N coordinates")
            if any(b <= a for a, b in zip(self.lo, self.hi)):
                raise MeshError("box has zero or negative measure")
        elif self.shape == "ball":
            if len(self.center) != self.N:
                raise MeshError("ball center must have N coordinates")
            if not self.radius > 0:
                raise MeshError("ball radius must be positive")
        else:
            raise MeshError(f"unknown domain shape {self.shape!r}")

    @classmethod
    def box(cls, lo, hi) -> "DomainSpec":
        lo, hi = tuple(map(float, lo)), tuple(map(float, hi))
        return cls(N=len(lo), shape="box", lo=lo, hi=hi)

    @classmethod
    def ball(cls, center, radius) -> "DomainSpec":
        center = tuple(map(float, center))
        return cls(N=len(center), shape="ball", center=center, radius=float(radius))

    def bounding_box(self):
        if self.shape == "box":
            return np.array(self.lo), np.array(self.hi)
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    @property
    def diameter(self) -> float:
        if self.shape == "ball":
            return 2.0 * self.radius
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    @property
    def measure(self) -> float:
        if self.shape == "box":
            return float(np.prod(np.subtract(self.hi, self.lo)))
        if self.N == 1:
            return 2.0 * self.radius
        return math.pi * self.radius**2

    def contains(self, pts: np.ndarray) -> np.ndarray:
        if self.shape == "box":
            return np.all((pts > np.array(self.lo)) & (pts < np.array(self.hi)), axis=1)
        return np.linalg.norm(pts - np.array(self.center), axis=1) < self.radius


def sphere_measure(N: int) -> float:
    """Surface measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


@dataclass(frozen=True, eq=False)
class Mesh:
    domain: DomainSpec
    n: int
    pad_factor: float
    h: float
    nodes: np.ndarray = field(repr=False)  # all cell centres, interior first
    n_inside: int
    shape: tuple  # cells per axis of the padded box
    tail_radius: float
    perm: np.ndarray = field(repr=False)  # nodes == natural_grid[perm]

    @property
    def N(self) -> int:
        return self.domain.N

    @property
    def cell_volume(self) -> float:
        return self.h**self.N

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[: self.n_inside]

    @property
    def ring(self) -> np.ndarray:
        return self.nodes[self.n_inside :]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def inside(self) -> np.ndarray:
        flags = np.zeros(self.n_nodes, dtype=bool)
        flags[: self.n_inside] = True
        return flags

    @property
    def natural_grid(self) -> np.ndarray:
        """All nodes in lexicographic grid order, shaped ``shape + (N,)``."""
        out = np.empty_like(self.nodes)
        out[self.perm] = self.nodes
        return out.reshape(self.shape + (self.N,))

    def summary(self) -> str:
        return (
            f"N={self.N} n={self.n} h={self.h!r} inside={self.n_inside} "
            f"ring={self.n_nodes - self.n_inside} R_pad={self.tail_radius!r}"
        )


def build_mesh(spec: DomainSpec, n: int = 64, pad_factor: float = 4.0) -> Mesh:
    """Grid with ``n`` cells across the longest side of the bounding box.

    The grid is extended by ``pad_factor * diam`` (rounded up to whole
    cells) on every side; nodes outside the domain form the ring.
    Interior nodes come first in ``Mesh.nodes``, each group in
    lexicographic order.
    """
    if n < 4:
        raise MeshError("need at least 4 cells per axis")
    if pad_factor < 1:
        raise MeshError("pad_factor must be >= 1")
    lo, hi = spec.bounding_box()
    side = hi - lo
    h = float(side.max()) / n
    counts = np.maximum(np.rint(side / h).astype(int), 1)
    pad = int(math.ceil(pad_factor * spec.diameter / h - 1e-9))
    axes = [lo[k] + (np.arange(-pad, counts[k] + pad) + 0.5) * h for k in range(spec.N)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.N)
    inside = spec.contains(grid)
    if not inside.any():
        raise MeshError("domain contains no cell centres; refine the mesh")
    perm = np.concatenate([np.flatnonzero(inside), np.flatnonzero(~inside)])
    nodes = grid[perm]
    return Mesh(
        domain=spec,
        n=n,
        pad_factor=pad_factor,
        h=h,
        nodes=nodes,
        n_inside=int(inside.sum()),
        shape=tuple(len(a) for a in axes),
        tail_radius=pad * h,
        perm=perm,
    )


def pair_weight(mesh: Mesh, i: int, j: int) -> float:
    """Midpoint weight of the cell pair (i, j); the diagonal is punctured."""
    if i == j:
        return 0.0
    return mesh.cell_volume**2
