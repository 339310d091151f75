"""HDBSCAN: density-based hierarchy over mutual reachability, flattened by stability.

Exact O(n^2) version: the full distance matrix is built once and the
minimum spanning tree is grown with dense Prim.
"""
from __future__ import annotations

from collections import deque

import numpy as np

from .. import _parallel
from .base import NOISE, DensityClustering

CONDENSED_DTYPE = np.dtype([("parent", np.int64), ("child", np.int64),
                            ("lambda_val", np.float64), ("child_size", np.int64)])


def _as_array(X):
    X = np.asarray(getattr(X, "values", X), dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-d, got shape {X.shape}")
    return X


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    return np.sqrt(_parallel.pairwise_sq_distances(X))


def core_distances(D: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to the ``min_samples``-th nearest point, the point itself counted first."""
    n = D.shape[0]
    if not 1 <= min_samples <= n:
        raise ValueError(f"min_samples must be in [1, {n}], got {min_samples}")
    return np.partition(D, min_samples - 1, axis=1)[:, min_samples - 1]


def mutual_reachability(D: np.ndarray, core: np.ndarray) -> np.ndarray:
    M = np.maximum(D, np.maximum.outer(core, core))
    np.fill_diagonal(M, 0.0)
    return M


def prim_mst(M: np.ndarray) -> np.ndarray:
    """Minimum spanning tree of a dense symmetric weight matrix.

    Returns ``(n-1, 3)`` rows ``(from, to, weight)`` in the order vertices
    join the tree, starting from vertex 0; ties go to the lowest index.
    """
    n = M.shape[0]
    edges = np.empty((max(n - 1, 0), 3))
    if n < 2:
        return edges
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = M[0].copy()
    src = np.zeros(n, dtype=np.int64)
    best[0] = np.inf
    for step in range(n - 1):
        j = int(np.argmin(best))
        edges[step] = (src[j], j, best[j])
        in_tree[j] = True
        best[j] = np.inf
        row = M[j]
        upd = (row < best) & ~in_tree
        best[upd] = row[upd]
        src[upd] = j
    return edges


def mutual_reachability_mst(X, min_samples: int) -> np.ndarray:
    X = _as_array(X)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 points")
    D = pairwise_distances(X)
    return prim_mst(mutual_reachability(D, core_distances(D, min_samples)))


def single_linkage(edges: np.ndarray, n: int) -> np.ndarray:
    """Linkage matrix (left, right, distance, size) from MST edges."""
    order = np.argsort(edges[:, 2], kind="stable")
    parent = np.arange(2 * n - 1)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    Z = np.empty((n - 1, 4))
    for step, e in enumerate(order):
        a, b, w = int(edges[e, 0]), int(edges[e, 1]), edges[e, 2]
        ra, rb = find(a), find(b)
        node = n + step
        parent[ra] = parent[rb] = node
        size[node] = size[ra] + size[rb]
        Z[step] = (min(ra, rb), max(ra, rb), w, size[node])
    return Z


def _leaves(Z: np.ndarray, node: int, n: int) -> list[int]:
    out, stack = [], [node]
    while stack:
        x = stack.pop()
        if x < n:
            out.append(x)
        else:
            stack.append(int(Z[x - n, 1]))
            stack.append(int(Z[x - n, 0]))
    return out


def condense_tree(Z: np.ndarray, min_cluster_size: int) -> np.ndarray:
    """Collapse the single-linkage tree to splits where both sides keep
    at least ``min_cluster_size`` points.

    Points are ``0..n-1``; the root cluster is ``n`` and new clusters are
    numbered upward in breadth-first order. ``lambda_val`` is 1/distance.
    """
    n = Z.shape[0] + 1
    root = 2 * n - 2
    relabel = {root: n}
    next_label = n + 1
    rows = []

    def size_of(x):
        return 1 if x < n else int(Z[x - n, 3])

    queue = deque([root])
    while queue:
        node = queue.popleft()
        left, right, dist = int(Z[node - n, 0]), int(Z[node - n, 1]), Z[node - n, 2]
        lam = 1.0 / dist if dist > 0 else np.inf
        parent = relabel[node]
        lc, rc = size_of(left), size_of(right)
        if lc >= min_cluster_size and rc >= min_cluster_size:
            for child, cnt in ((left, lc), (right, rc)):
                relabel[child] = next_label
                rows.append((parent, next_label, lam, cnt))
                next_label += 1
                queue.append(child)
            continue
        for child, cnt in ((left, lc), (right, rc)):
            if cnt >= min_cluster_size:
                relabel[child] = parent
                queue.append(child)
            else:
                rows.extend((parent, p, lam, 1) for p in _leaves(Z, child, n))
    return np.array(rows, dtype=CONDENSED_DTYPE)


def _excess(lam, birth):
    # inf - inf: a cluster born and dissolved at zero distance contributes nothing
    if lam == birth:
        return 0.0
    return lam - birth


def stabilities(tree: np.ndarray) -> dict[int, float]:
    root = int(tree["parent"].min())
    birth = {root: 0.0}
    for r in tree[tree["child_size"] > 1]:
        birth[int(r["child"])] = float(r["lambda_val"])
    stab = {c: 0.0 for c in birth}
    for r in tree:
        p = int(r["parent"])
        stab[p] += _excess(float(r["lambda_val"]), birth[p]) * int(r["child_size"])
    return stab


def select_clusters(tree: np.ndarray, stab: dict[int, float]) -> list[int]:
    """Excess-of-mass selection below the root; the root only when nothing splits."""
    root = int(tree["parent"].min())
    kids: dict[int, list[int]] = {c: [] for c in stab}
    for r in tree[tree["child_size"] > 1]:
        kids[int(r["parent"])].append(int(r["child"]))
    if not kids[root]:
        return [root]
    chosen = {c: True for c in stab if c != root}
    total = dict(stab)
    for c in sorted(chosen, reverse=True):
        sub = sum(total[k] for k in kids[c])
        if kids[c] and sub > stab[c]:
            chosen[c] = False
            total[c] = sub
        else:
            stack = list(kids[c])
            while stack:
                k = stack.pop()
                chosen[k] = False
                stack.extend(kids[k])
    return sorted(c for c, ok in chosen.items() if ok)


def hdbscan(X, min_cluster_size: int = 15, min_samples: int | None = None) -> DensityClustering:
    """Flat density clustering with noise.

    ``membership_score`` is the lambda at which a point left the tree,
    capped at and divided by the largest finite lambda among the selected
    cluster's own rows; points that survive to zero distance score 1.
    """
    X = _as_array(X)
    n = X.shape[0]
    if min_cluster_size < 2:
        raise ValueError(f"min_cluster_size must be >= 2, got {min_cluster_size}")
    if min_cluster_size > n:
        raise ValueError(f"min_cluster_size={min_cluster_size} exceeds the number of points {n}")
    min_samples = min_cluster_size if min_samples is None else min_samples
    D = pairwise_distances(X)
    edges = prim_mst(mutual_reachability(D, core_distances(D, min_samples)))
    tree = condense_tree(single_linkage(edges, n), min_cluster_size)
    stab = stabilities(tree)
    selected = select_clusters(tree, stab)

    parent_of = {int(r["child"]): int(r["parent"]) for r in tree}
    point_rows = tree[tree["child_size"] == 1]
    fall_lambda = np.zeros(n)
    fall_from = np.empty(n, dtype=np.int64)
    fall_lambda[point_rows["child"]] = point_rows["lambda_val"]
    fall_from[point_rows["child"]] = point_rows["parent"]

    root = n
    labels = np.full(n, NOISE, dtype=np.int64)
    if selected == [root]:
        labels[:] = 0
    else:
        label_of = {c: i for i, c in enumerate(selected)}
        owner: dict[int, int] = {}
        for c in sorted(stab):
            if c in label_of:
                owner[c] = label_of[c]
            elif c != root and parent_of[c] in owner:
                owner[c] = owner[parent_of[c]]
        for p in range(n):
            labels[p] = owner.get(int(fall_from[p]), NOISE)

    scores = np.zeros(n)
    for lab, c in enumerate(selected):
        own = tree["lambda_val"][tree["parent"] == c]
        own = own[np.isfinite(own)]
        top = own.max() if own.size else 0.0
        members = labels == lab
        lam = fall_lambda[members]
        s = np.ones(lam.shape)
        if top > 0:
            s = np.minimum(lam, top) / top
        scores[members] = s
    return DensityClustering(labels, scores, tree, stab, selected, min_cluster_size, min_samples)
