"""Bottom-up hierarchical clustering with Lance-Williams distance updates.

Merges are found with the nearest-neighbour-chain algorithm, which is exact
for the reducible linkages offered here (single, complete, average, ward)
and needs O(n^2) time and memory.
"""
from __future__ import annotations

import numpy as np

from .. import _parallel
from .base import Dendrogram, HardClustering, centers_and_distortion

LINKAGES = ("single", "complete", "average", "ward")
MAX_POINTS = 20_000


def _lance_williams(kind, d_ik, d_jk, d_ij, n_i, n_j, n_k):
    if kind == "single":
        return np.minimum(d_ik, d_jk)
    if kind == "complete":
        return np.maximum(d_ik, d_jk)
    if kind == "average":
        return (n_i * d_ik + n_j * d_jk) / (n_i + n_j)
    # ward on squared distances
    return ((n_i + n_k) * d_ik + (n_j + n_k) * d_jk - n_k * d_ij) / (n_i + n_j + n_k)


def _nn_chain(D: np.ndarray, kind: str):
    """Run the NN-chain; returns merges ``(a, b, dist)`` in discovery order.

    ``a`` and ``b`` are slot indices: the merged cluster lives on in slot
    ``b``, and each slot index is always a member point of its cluster.
    """
    n = D.shape[0]
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    np.fill_diagonal(D, np.inf)
    merges = []
    chain: list[int] = []
    for _ in range(n - 1):
        if not chain:
            chain.append(int(np.argmax(active)))
        while True:
            x = chain[-1]
            row = np.where(active, D[x], np.inf)
            row[x] = np.inf
            y = int(np.argmin(row))
            if len(chain) > 1 and row[chain[-2]] == row[y]:
                y = chain[-2]
            if len(chain) > 1 and y == chain[-2]:
                break
            chain.append(y)
        b = chain.pop()
        a = chain.pop()
        if a > b:
            a, b = b, a
        d_ab = D[a, b]
        merges.append((a, b, d_ab))
        others = active.copy()
        others[[a, b]] = False
        new = _lance_williams(kind, D[a, others], D[b, others], d_ab, size[a], size[b], size[others])
        D[b, others] = new
        D[others, b] = new
        active[a] = False
        D[a, :] = np.inf
        D[:, a] = np.inf
        size[b] += size[a]
    return merges


def _to_linkage(merges, n: int) -> np.ndarray:
    """Sort discovered merges and relabel slots to linkage node ids."""
    # a merge can never come before the merges that built its operands
    eff = np.empty(len(merges))
    last = {}
    for i, (a, b, d) in enumerate(merges):
        e = d
        for s in (a, b):
            if s in last:
                e = max(e, eff[last[s]])
        eff[i] = e
        last[b] = i
        last.pop(a, None)
    order = np.argsort(eff, kind="stable")
    parent = np.arange(n)
    node = np.arange(n)          # root point -> current node id
    sizes = np.ones(n, dtype=np.int64)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    Z = np.empty((len(merges), 4))
    for step, i in enumerate(order):
        a, b, _ = merges[i]
        ra, rb = find(a), find(b)
        left, right = sorted((node[ra], node[rb]))
        parent[ra] = rb
        sizes[rb] += sizes[ra]
        node[rb] = n + step
        Z[step] = (left, right, eff[i], sizes[rb])
    return Z


def linkage_tree(X, linkage: str = "ward", allow_large: bool = False) -> Dendrogram:
    X = np.asarray(getattr(X, "values", X), dtype=np.float64)
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    if n > MAX_POINTS and not allow_large:
        raise ValueError(
            f"{n} points would need an {n}x{n} distance matrix; pass allow_large=True to proceed")
    D = _parallel.pairwise_sq_distances(X)
    if linkage != "ward":
        D = np.sqrt(D)
    Z = _to_linkage(_nn_chain(D, linkage), n)
    if linkage == "ward":
        Z[:, 2] = np.sqrt(np.maximum(Z[:, 2], 0.0))
    return Dendrogram(Z, linkage)


def cut_tree(dendro: Dendrogram, K: int) -> np.ndarray:
    """Flat labels after the first ``n - K`` merges.

    Clusters are numbered by their smallest member index.
    """
    n = dendro.n_points
    if not 1 <= K <= n:
        raise ValueError(f"K must be in [1, {n}], got {K}")
    parent = np.arange(2 * n - 1)
    for step in range(n - K):
        left, right = int(dendro.merges[step, 0]), int(dendro.merges[step, 1])
        parent[left] = n + step
        parent[right] = n + step
    roots = np.empty(n, dtype=np.int64)
    for i in range(n):
        x = i
        while parent[x] != x:
            x = parent[x]
        roots[i] = x
    _, labels = np.unique(roots, return_inverse=True)
    # renumber by first appearance
    first = {}
    out = np.empty(n, dtype=np.int64)
    for i, r in enumerate(labels):
        out[i] = first.setdefault(int(r), len(first))
    return out


def agglomerative(X, K: int, linkage: str = "ward", allow_large: bool = False):
    """Full merge tree plus its ``K``-cluster cut; returns ``(Dendrogram, HardClustering)``."""
    V = np.asarray(getattr(X, "values", X), dtype=np.float64)
    n = V.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"K must be in [1, {n}], got {K}")
    dendro = linkage_tree(V, linkage, allow_large)
    labels = cut_tree(dendro, K)
    centers, distortion = centers_and_distortion(V, labels, K)
    return dendro, HardClustering(labels, centers, distortion, n - K, None, [distortion], "agglomerative")
