"""A small random-forest classifier with Gini importances.

Trees are CART-style, grown on bootstrap samples with a random subset of
candidate features per node. Each tree draws from its own generator seeded
by ``(seed, tree_index)``, so growing trees on a thread pool gives the same
forest as growing them one by one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _parallel


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_leaf: int = 1
    mtry: Optional[int] = None  # None -> ceil(sqrt(d))
    seed: int = 0


@dataclass(eq=False)
class Tree:
    feature: np.ndarray      # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray       # per-node class counts
    importance: np.ndarray   # per-feature weighted impurity decrease

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node


@dataclass(eq=False)
class ForestModel:
    trees: list
    n_features: int
    classes: np.ndarray
    params: ForestParams = field(default_factory=ForestParams)


def _best_split(Xn: np.ndarray, Yn: np.ndarray, feats: np.ndarray, min_leaf: int):
    """Best Gini split of one node over candidate features ``feats``.

    Returns ``(score, feature, threshold)`` where a larger score means a
    purer split (``sum_c L_c^2/n_L + sum_c R_c^2/n_R``), or None. Ties go to
    the lowest feature index, then the lowest threshold.
    """
    m = Xn.shape[0]
    cols = Xn[:, feats]
    order = np.argsort(cols, axis=0, kind="stable")
    sv = np.take_along_axis(cols, order, axis=0)
    left = np.cumsum(Yn[order], axis=0)[:-1]              # (m-1, f, C)
    total = Yn.sum(axis=0)
    n_left = np.arange(1, m, dtype=np.float64)[:, None]
    n_right = m - n_left
    right = total[None] - left
    score = (left ** 2).sum(-1) / n_left + (right ** 2).sum(-1) / n_right
    valid = sv[1:] > sv[:-1]
    if min_leaf > 1:
        ok = (n_left >= min_leaf) & (n_right >= min_leaf)
        valid &= ok
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    best = score.max()
    # stable tie-break: features ascending, then split position ascending
    fo = np.argsort(feats, kind="stable")
    cand = score[:, fo] == best
    pos_of_feat = cand.argmax(axis=0)
    has = cand.any(axis=0)
    j = int(np.argmax(has))
    fcol = fo[j]
    p = int(pos_of_feat[j])
    thr = 0.5 * (sv[p, fcol] + sv[p + 1, fcol])
    if not thr < sv[p + 1, fcol]:  # midpoint rounding onto the upper value
        thr = sv[p, fcol]
    return float(best), int(feats[fcol]), float(thr)


def _grow_tree(X: np.ndarray, Y: np.ndarray, params: ForestParams, mtry: int, tree_index: int) -> Tree:
    rng = np.random.default_rng([params.seed, tree_index])
    n, d = X.shape
    boot = rng.integers(0, n, size=n)
    Xb = X[boot]
    Yb = Y[boot]
    N = float(n)
    feature, threshold, left, right, counts = [], [], [], [], []
    importance = np.zeros(d)

    def new_node(cnt):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(cnt)
        return len(feature) - 1

    root = new_node(Yb.sum(axis=0))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        cnt = counts[node]
        m = idx.shape[0]
        if m < 2 * params.min_leaf or (cnt > 0).sum() <= 1:
            continue
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        Xn = Xb[idx]
        Yn = Yb[idx]
        perm = rng.permutation(d)
        found = None
        for s in range(0, d, mtry):
            found = _best_split(Xn, Yn, perm[s:s + mtry], params.min_leaf)
            if found is not None:
                break
        if found is None:
            continue
        score, f, thr = found
        parent = m - float((cnt ** 2).sum()) / m
        child = m - score
        importance[f] += max(parent - child, 0.0) / N
        go_left = Xn[:, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        ln = new_node(Yb[li].sum(axis=0))
        rn = new_node(Yb[ri].sum(axis=0))
        feature[node], threshold[node], left[node], right[node] = f, thr, ln, rn
        stack.append((rn, ri, depth + 1))
        stack.append((ln, li, depth + 1))
    return Tree(np.asarray(feature, dtype=np.intp), np.asarray(threshold), np.asarray(left, dtype=np.intp),
                np.asarray(right, dtype=np.intp), np.asarray(counts), importance)


def rf_fit(X, y: Sequence, params: ForestParams = ForestParams()) -> ForestModel:
    """Grow a classification forest on ``X`` (array or FeatureMatrix) and labels ``y``."""
    X = np.asarray(getattr(X, "values", X), dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError(f"need a non-empty 2-d feature matrix, got shape {X.shape}")
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least 2 samples")
    if y.shape[0] != n:
        raise ValueError(f"{n} rows but {y.shape[0]} labels")
    classes, codes = np.unique(y, return_inverse=True)
    if classes.shape[0] < 2:
        raise ValueError("need at least 2 distinct class labels")
    if params.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    mtry = params.mtry if params.mtry is not None else math.ceil(math.sqrt(d))
    if not 1 <= mtry <= d:
        raise ValueError(f"mtry must be in [1, {d}], got {mtry}")
    Y = np.eye(classes.shape[0])[codes]
    trees = _parallel.ordered_map(lambda t: _grow_tree(X, Y, params, mtry, t), range(params.n_trees))
    return ForestModel(trees, d, classes, params)


def rf_importances(model: ForestModel) -> np.ndarray:
    """Mean Gini decrease per feature over trees, normalized to sum to 1.

    A forest without a single split gives the zero vector.
    """
    imp = np.zeros(model.n_features)
    for t in model.trees:
        imp += t.importance
    imp /= max(len(model.trees), 1)
    total = imp.sum()
    return imp / total if total > 0 else imp


def rf_predict(model: ForestModel, X) -> np.ndarray:
    """Majority vote of the trees; vote ties go to the first class."""
    X = np.asarray(getattr(X, "values", X), dtype=np.float64)
    if X.ndim != 2:
        X = X.reshape(-1, model.n_features)
    if X.shape[1] != model.n_features:
        raise ValueError(f"model has {model.n_features} features, X has {X.shape[1]}")
    if X.shape[0] == 0:
        return model.classes[:0]
    votes = np.zeros((X.shape[0], model.classes.shape[0]), dtype=np.int64)
    rows = np.arange(X.shape[0])
    for t in model.trees:
        leaf_counts = t.counts[t.apply(X)]
        votes[rows, leaf_counts.argmax(axis=1)] += 1
    return model.classes[votes.argmax(axis=1)]
