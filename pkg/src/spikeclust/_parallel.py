"""Thread fan-out helpers shared by the numeric kernels.

Work is split into chunks whose boundaries depend only on the problem size,
never on the thread count, and results are reassembled in chunk order. That
makes every kernel built on top of these helpers bit-identical whatever
``set_num_threads`` was given.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

CHUNK_ROWS = 256
_num_threads = 1


def set_num_threads(n: int) -> None:
    global _num_threads
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    _num_threads = int(n)


def get_num_threads() -> int:
    return _num_threads


def chunk_bounds(n: int, chunk: int = CHUNK_ROWS) -> list[tuple[int, int]]:
    return [(s, min(s + chunk, n)) for s in range(0, n, chunk)]


def ordered_map(fn: Callable[..., T], items: Sequence) -> list[T]:
    """``[fn(x) for x in items]``, possibly run on a thread pool."""
    if _num_threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_num_threads) as pool:
        return list(pool.map(fn, items))


def sq_distances(A: np.ndarray, B: np.ndarray, B_sq: np.ndarray | None = None,
                 A_sq: np.ndarray | None = None) -> np.ndarray:
    """Squared Euclidean distances between rows of ``A`` and rows of ``B``.

    Uses the ``|a|^2 + |b|^2 - 2ab`` expansion in fixed row chunks of ``A``;
    negative round-off is clipped to zero. ``A_sq``/``B_sq`` are optional
    precomputed row norms.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if B_sq is None:
        B_sq = np.einsum("ij,ij->i", B, B)

    def block(bounds):
        s, e = bounds
        a = A[s:e]
        a_sq = np.einsum("ij,ij->i", a, a) if A_sq is None else A_sq[s:e]
        d = a_sq[:, None] + B_sq[None, :] - 2.0 * (a @ B.T)
        np.maximum(d, 0.0, out=d)
        return d

    parts = ordered_map(block, chunk_bounds(A.shape[0]))
    if not parts:
        return np.empty((0, B.shape[0]))
    return np.vstack(parts)


def pairwise_sq_distances(X: np.ndarray) -> np.ndarray:
    """Symmetric squared distance matrix with an exact zero diagonal."""
    D = sq_distances(X, X)
    # symmetrize so d(i, j) and d(j, i) are the same float
    D = np.minimum(D, D.T)
    np.fill_diagonal(D, 0.0)
    return D
