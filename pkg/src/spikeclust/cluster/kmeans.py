"""Lloyd's k-means with greedy k-means++ seeding."""
from __future__ import annotations

import math

import numpy as np

from .. import _parallel
from .base import HardClustering


def _check(X, K):
    X = np.asarray(getattr(X, "values", X), dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-d, got shape {X.shape}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if K > X.shape[0]:
        raise ValueError(f"K={K} exceeds the number of points {X.shape[0]}")
    return X


def kmeans_plusplus(X: np.ndarray, K: int, rng: np.random.Generator, x_sq=None) -> np.ndarray:
    """Greedy k-means++: each step samples ``2 + log K`` candidates by D^2
    weighting and keeps the one that lowers the potential most."""
    n = X.shape[0]
    x_sq = np.einsum("ij,ij->i", X, X) if x_sq is None else x_sq
    trials = 2 + int(math.log(K))
    centers = np.empty((K, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest = _parallel.sq_distances(X, X[first:first + 1], A_sq=x_sq).ravel()
    for c in range(1, K):
        pot = closest.sum()
        if pot > 0:
            cand = np.searchsorted(np.cumsum(closest), rng.random(trials) * pot)
            cand = np.minimum(cand, n - 1)
        else:
            cand = rng.integers(n, size=trials)
        d_cand = _parallel.sq_distances(X[cand], X, x_sq, x_sq[cand]).T     # (n, trials)
        new_closest = np.minimum(closest[:, None], d_cand)
        best = int(np.argmin(new_closest.sum(axis=0)))
        centers[c] = X[cand[best]]
        closest = new_closest[:, best]
    return centers


def fill_empty(labels: np.ndarray, point_cost: np.ndarray, K: int) -> None:
    """Give every empty cluster the costliest point of a cluster with >1 member.

    Works in place. Moving a point onto its own new center only lowers the
    total cost, so the objective stays monotone.
    """
    counts = np.bincount(labels, minlength=K)
    for j in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        cost = np.where(movable, point_cost, -np.inf)
        p = int(np.argmax(cost))
        counts[labels[p]] -= 1
        labels[p] = j
        counts[j] = 1
        point_cost[p] = 0.0


def _cost(X, C, labels):
    """Exact squared distance of each row to its center, in cache-sized row blocks."""
    out = np.empty(X.shape[0])
    for s, e in _parallel.chunk_bounds(X.shape[0]):
        diff = X[s:e] - C[labels[s:e]]
        out[s:e] = np.einsum("ij,ij->i", diff, diff)
    return out


def cluster_means(X, labels, K):
    """Per-cluster mean rows; an empty cluster gets a zero row."""
    counts = np.bincount(labels, minlength=K)
    onehot = np.zeros((K, X.shape[0]))
    onehot[labels, np.arange(X.shape[0])] = 1.0
    C = onehot @ X
    nonempty = counts > 0
    C[nonempty] /= counts[nonempty, None]
    return C


def _lloyd(X, K, init, max_iters, tol_abs, x_sq=None):
    C = init
    history = []
    it = 0
    for it in range(1, max_iters + 1):
        labels = _parallel.sq_distances(X, C, A_sq=x_sq).argmin(axis=1)
        cost = _cost(X, C, labels)
        fill_empty(labels, cost, K)
        history.append(float(cost.sum()))
        C_new = cluster_means(X, labels, K)
        shift = float(((C_new - C) ** 2).sum())
        C = C_new
        if shift <= tol_abs:
            break
    # final assignment so labels and centers agree
    labels = _parallel.sq_distances(X, C, A_sq=x_sq).argmin(axis=1)
    if np.bincount(labels, minlength=K).min() == 0:
        fill_empty(labels, _cost(X, C, labels), K)
        C = cluster_means(X, labels, K)
    distortion = float(_cost(X, C, labels).sum())
    history.append(distortion)
    return labels, C, distortion, it, history


def kmeans(X, K: int, max_iters: int = 300, tol: float = 1e-4, n_init: int = 10, seed: int = 0) -> HardClustering:
    """Best of ``n_init`` Lloyd runs by distortion.

    ``tol`` is relative to the mean column variance of ``X``: a run stops
    when the squared center shift drops to ``tol * mean(var(X))`` or below.
    """
    X = _check(X, K)
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    x_sq = np.einsum("ij,ij->i", X, X)
    tol_abs = tol * float(X.var(axis=0).mean()) if X.shape[0] else 0.0
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        init = kmeans_plusplus(X, K, rng, x_sq)
        res = _lloyd(X, K, init, max_iters, tol_abs, x_sq)
        if best is None or res[2] < best[2]:
            best = res
    labels, C, distortion, iters, history = best
    return HardClustering(labels, C, distortion, iters, seed, history, "kmeans")
