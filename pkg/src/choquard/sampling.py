"""Random test functions and fixed bumps on the mesh."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh

SMOOTHING_PASSES = 3


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Per-sample generator derived deterministically from (seed, index)."""
    return np.random.default_rng([int(seed), int(index)])


def smooth(u: np.ndarray, mesh: Mesh, passes: int = SMOOTHING_PASSES) -> np.ndarray:
    """Nearest-neighbour averaging on the grid with u = 0 outside the domain."""
    idx = mesh.perm[: mesh.n_inside]
    inside = np.zeros(mesh.n_nodes, dtype=bool)
    inside[idx] = True
    inside = inside.reshape(mesh.shape)
    grid = np.zeros(mesh.n_nodes)
    grid[idx] = u
    grid = grid.reshape(mesh.shape)
    for _ in range(passes):
        # the padded box edges are ring cells, so wrap-around only moves zeros
        acc = grid + sum(np.roll(grid, k, axis=ax) for ax in range(mesh.N) for k in (1, -1))
        grid = np.where(inside, acc / (2 * mesh.N + 1), 0.0)
    return grid.ravel()[idx]


def random_function(mesh: Mesh, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. U[-1, 1] nodal values, smoothed, rescaled to unit max norm."""
    u = smooth(rng.uniform(-1.0, 1.0, mesh.n_inside), mesh)
    peak = np.max(np.abs(u))
    return u / peak if peak > 0 else u


def bump(mesh: Mesh) -> np.ndarray:
    """A fixed positive function on the interior, vanishing at the boundary."""
    X = mesh.interior
    dom = mesh.domain
    if dom.shape == "box":
        lo, hi = np.array(dom.lo), np.array(dom.hi)
        return np.prod(np.sin(np.pi * (X - lo) / (hi - lo)), axis=1)
    c = np.array(dom.center)
    return 1.0 - ((X - c) ** 2).sum(axis=1) / dom.radius**2
