"""Fuzzy c-means (Bezdek) by alternating optimization.

Minimizes ``J = sum_ij u_ij^m |x_i - c_j|^2`` subject to each row of ``U``
summing to one.
"""
from __future__ import annotations

import numpy as np

from .. import _parallel
from .base import FuzzyClustering
from .kmeans import _check

# squared distances below this fraction of the local scale count as "on the center"
_COINCIDENT = 1e-12


def memberships(D2: np.ndarray, m: float, scale: np.ndarray | None = None) -> np.ndarray:
    """Optimal memberships for fixed centers given squared distances ``D2``.

    ``u_ij = 1 / sum_l (d_ij / d_il)^(2/(m-1))``, evaluated as a softmax of
    ``-(2/(m-1)) log d_ij`` so that fuzzifiers close to 1 do not overflow.
    A point sitting on one or more centers shares its membership equally
    between them.
    """
    p = 1.0 / (m - 1.0)            # (d^2)^(1/(m-1)) == d^(2/(m-1))
    if scale is None:
        scale = np.ones(D2.shape[0])
    zero = D2 <= _COINCIDENT * np.maximum(scale, 1.0)[:, None]
    with np.errstate(divide="ignore"):
        logits = -p * np.log(D2)
    hit = zero.any(axis=1)
    U = np.empty_like(D2)
    if (~hit).any():
        L = logits[~hit]
        L = L - L.max(axis=1, keepdims=True)
        E = np.exp(L)
        U[~hit] = E / E.sum(axis=1, keepdims=True)
    if hit.any():
        Z = zero[hit].astype(np.float64)
        U[hit] = Z / Z.sum(axis=1, keepdims=True)
    return U


def fuzzy_cmeans(X, K: int, m: float = 2.0, max_iters: int = 300, tol: float = 1e-5,
                 seed: int = 0) -> FuzzyClustering:
    """Alternate center and membership updates until ``max |dU| < tol``.

    Starts from random memberships. ``history`` records ``J`` after every
    membership update; it never increases.
    """
    X = _check(X, K)
    if not m > 1:
        raise ValueError(f"fuzzifier m must be > 1, got {m}")
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    U = rng.random((n, K))
    U /= U.sum(axis=1, keepdims=True)
    x_sq = np.einsum("ij,ij->i", X, X)
    history = []
    C = np.zeros((K, X.shape[1]))
    J = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        W = U ** m
        C = (W.T @ X) / W.sum(axis=0)[:, None]
        D2 = _parallel.sq_distances(X, C)
        c_sq = np.einsum("ij,ij->i", C, C)
        U_new = memberships(D2, m, scale=x_sq + c_sq.max())
        J = float(((U_new ** m) * D2).sum())
        history.append(J)
        delta = float(np.abs(U_new - U).max())
        U = U_new
        if delta < tol:
            break
    return FuzzyClustering(U, C, float(m), J, it, seed, history)
