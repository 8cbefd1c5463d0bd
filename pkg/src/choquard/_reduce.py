"""Deterministic row-blocked reductions.

Row values are computed in fixed blocks (optionally on a thread pool) and
summed with ``math.fsum``, so totals do not depend on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 64
_threads = 1


def set_threads(n: int) -> None:
    global _threads
    if n < 1:
        raise ValueError("threads must be >= 1")
    _threads = int(n)


def get_threads() -> int:
    return _threads


def row_values(fn, n_rows: int) -> np.ndarray:
    """Concatenate ``fn(slice)`` over fixed row blocks."""
    slices = [slice(a, min(a + BLOCK, n_rows)) for a in range(0, n_rows, BLOCK)]
    if _threads > 1 and len(slices) > 1:
        with ThreadPoolExecutor(_threads) as pool:
            parts = list(pool.map(fn, slices))
    else:
        parts = [fn(sl) for sl in slices]
    return np.concatenate(parts) if parts else np.zeros(0)


def total(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).ravel())
