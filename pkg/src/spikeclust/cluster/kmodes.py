"""k-modes: k-means for categorical columns under simple-matching dissimilarity.

Every distinct value in a column is its own category, so integer k-mer
counts can be clustered directly.
"""
from __future__ import annotations

import numpy as np

from .. import _parallel
from .base import HardClustering
from .kmeans import _check, fill_empty

_COUNTING_MAX = 64


def encode_categories(X: np.ndarray):
    """Map every value of ``X`` to a small integer code; returns ``(codes, values)``."""
    values, inv = np.unique(X, return_inverse=True)
    dtype = np.uint8 if values.shape[0] <= 256 else np.int32
    return inv.reshape(X.shape).astype(dtype), values


def mismatches(codes: np.ndarray, modes: np.ndarray) -> np.ndarray:
    """``(n, K)`` count of columns where each row differs from each mode."""
    def block(bounds):
        s, e = bounds
        c = codes[s:e]
        return np.stack([(c != m).sum(axis=1) for m in modes], axis=1)

    parts = _parallel.ordered_map(block, _parallel.chunk_bounds(codes.shape[0]))
    return np.vstack(parts) if parts else np.zeros((0, modes.shape[0]), dtype=np.int64)


def column_modes(block: np.ndarray, n_codes: int) -> np.ndarray:
    """Most frequent code per column, smallest code on ties."""
    if n_codes <= _COUNTING_MAX:
        counts = np.stack([(block == v).sum(axis=0) for v in range(n_codes)])
        return counts.argmax(axis=0).astype(block.dtype)
    out = np.empty(block.shape[1], dtype=block.dtype)
    for j in range(block.shape[1]):
        vals, cnt = np.unique(block[:, j], return_counts=True)
        out[j] = vals[int(np.argmax(cnt))]
    return out


def _modes(codes, labels, K, n_codes):
    return np.stack([column_modes(codes[labels == k], n_codes) for k in range(K)])


def _init_modes(codes: np.ndarray, K: int, rng: np.random.Generator, distinct: np.ndarray) -> np.ndarray:
    """K rows drawn at random, from the ``distinct`` rows when there are enough."""
    if distinct.shape[0] >= K:
        pick = rng.choice(distinct, size=K, replace=False)
    else:
        pick = rng.choice(codes.shape[0], size=K, replace=False)
    return codes[np.sort(pick)].copy()


def _run(codes, K, init, max_iters, n_codes):
    modes = init
    labels = None
    history = []
    it = 0
    for it in range(1, max_iters + 1):
        D = mismatches(codes, modes)
        new = D.argmin(axis=1)
        cost = D[np.arange(codes.shape[0]), new].astype(np.float64)
        fill_empty(new, cost, K)
        history.append(float(cost.sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        modes = _modes(codes, labels, K, n_codes)
    D = mismatches(codes, modes)
    cost = float(D[np.arange(codes.shape[0]), labels].sum())
    if not history or cost != history[-1]:
        history.append(cost)
    return labels, modes, cost, it, history


def kmodes(X, K: int, max_iters: int = 100, n_init: int = 10, seed: int = 0) -> HardClustering:
    """Best of ``n_init`` k-modes runs by total matching cost.

    Each run alternates nearest-mode assignment (lowest mode index on ties)
    with per-column mode updates and stops once assignments repeat.
    ``centers`` holds the modes in the original value space.
    """
    X = _check(X, K)
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    codes, values = encode_categories(X)
    n_codes = values.shape[0]
    distinct = np.sort(np.unique(codes, axis=0, return_index=True)[1])
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        res = _run(codes, K, _init_modes(codes, K, rng, distinct), max_iters, n_codes)
        if best is None or res[2] < best[2]:
            best = res
    labels, modes, cost, iters, history = best
    return HardClustering(labels, values[modes], cost, iters, seed, history, "kmodes")
