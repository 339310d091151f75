"""Exact t-SNE for 2-d pictures of the feature space.

Everything is dense O(n^2), which is why the point count is capped; larger
inputs should be subsampled per variant first.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from . import _parallel

MAX_POINTS = 5000
EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
_ENTROPY_TOL = 1e-5
_MACHINE_EPS = np.finfo(np.float64).eps


@dataclass(eq=False)
class Embedding:
    coords: np.ndarray
    perplexity: float
    kl_divergence: float
    iterations: int
    seed: int = 0
    kl_history: list = field(default_factory=list)   # (iteration, KL) checkpoints


def _row_entropy(D2: np.ndarray, beta: np.ndarray):
    """Shannon entropy (nats) and probabilities of each Gaussian row."""
    # shift by the row minimum so the largest weight is exp(0)
    shifted = D2 - D2.min(axis=1, keepdims=True)
    W = np.exp(-shifted * beta[:, None])
    S = W.sum(axis=1)
    P = W / S[:, None]
    H = np.log(S) + beta * (shifted * P).sum(axis=1)
    return H, P


def conditional_probabilities(D2: np.ndarray, perplexity: float, max_steps: int = 200):
    """Row-wise Gaussian affinities ``p_{j|i}`` with entropy ``log(perplexity)``.

    ``D2`` holds squared distances; the diagonal is ignored. Each row's
    precision is found by bisection (doubling until the target is bracketed).
    Returns ``(P, beta)``.
    """
    D2 = np.asarray(D2, dtype=np.float64)
    n = D2.shape[0]
    if D2.ndim != 2 or D2.shape[1] != n:
        raise ValueError(f"distance matrix must be square, got shape {D2.shape}")
    if not 1 < perplexity < n:
        raise ValueError(f"perplexity must be in (1, {n}), got {perplexity}")
    # drop the diagonal: (n, n-1)
    off = ~np.eye(n, dtype=bool)
    R = D2[off].reshape(n, n - 1)
    target = np.log(perplexity)
    beta = np.ones(n)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    H, Prow = _row_entropy(R, beta)
    for _ in range(max_steps):
        gap = H - target
        active = np.abs(gap) > _ENTROPY_TOL
        if not active.any():
            break
        # entropy falls as beta grows
        up = active & (gap > 0)
        down = active & (gap < 0)
        lo[up] = beta[up]
        hi[down] = beta[down]
        beta[up] = np.where(np.isinf(hi[up]), beta[up] * 2.0, (beta[up] + hi[up]) / 2.0)
        beta[down] = (beta[down] + lo[down]) / 2.0
        H_new, P_new = _row_entropy(R[active], beta[active])
        H[active] = H_new
        Prow[active] = P_new
    P = np.zeros((n, n))
    P[off] = Prow.ravel()
    return P, beta


def perplexity_calibration(D2: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetric joint affinities ``(p_{j|i} + p_{i|j}) / 2n``, summing to 1."""
    P, _ = conditional_probabilities(D2, perplexity)
    P = (P + P.T) / (2.0 * P.shape[0])
    return P / P.sum()


def _kl(P, Q):
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / np.maximum(Q[mask], _MACHINE_EPS))))


def _q_terms(Y):
    num = 1.0 / (1.0 + _parallel.pairwise_sq_distances(Y))
    np.fill_diagonal(num, 0.0)
    Q = num / num.sum()
    return num, Q


def tsne(X, perplexity: float = 30.0, iters: int = 1000, learning_rate: Optional[float] = None,
         seed: int = 0, max_points: int = MAX_POINTS, checkpoint: int = 50) -> Embedding:
    """2-d t-SNE by gradient descent with momentum and per-coordinate gains.

    Affinities are exaggerated 12-fold for the first 250 iterations with
    momentum 0.5, then momentum rises to 0.8. The default learning rate is
    ``max(n / 48, 50)``. Perplexity is lowered to ``(n - 1) / 3`` when the
    data are too few for the requested value. Output is centered; input
    whose points all coincide maps to the origin.
    """
    V = np.asarray(getattr(X, "values", X), dtype=np.float64)
    n = V.shape[0]
    if n < 5:
        raise ValueError(f"t-SNE needs at least 5 points, got {n}")
    if n > max_points:
        raise ValueError(
            f"{n} points exceed the exact t-SNE cap of {max_points}; "
            "subsample first (e.g. --embed-max) or raise the cap")
    if perplexity >= (n - 1) / 3:
        eff = (n - 1) / 3
        warnings.warn(f"perplexity {perplexity} too large for {n} points; using {eff:.3g}", stacklevel=2)
        perplexity = eff
    lr = max(n / EXAGGERATION / 4.0, 50.0) if learning_rate is None else float(learning_rate)

    D2 = _parallel.pairwise_sq_distances(V)
    if not D2.any():
        # all points coincide: the collapsed layout is exact and KL is 0
        return Embedding(np.zeros((n, 2)), float(perplexity), 0.0, 0, seed, [])
    P = perplexity_calibration(D2, perplexity)

    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    history = []
    for it in range(1, iters + 1):
        early = it <= EXAGGERATION_ITERS
        Pe = P * EXAGGERATION if early else P
        num, Q = _q_terms(Y)
        W = (Pe - Q) * num
        grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)
        momentum = 0.5 if early else 0.8
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - lr * gains * grad
        Y = Y + update
        Y -= Y.mean(axis=0)
        if checkpoint and it % checkpoint == 0:
            history.append((it, _kl(P, Q)))
    _, Q = _q_terms(Y)
    kl = max(_kl(P, Q), 0.0)
    return Embedding(Y, float(perplexity), kl, iters, seed, history)


def stratified_subsample(groups: Sequence, max_points: int, seed: int = 0) -> np.ndarray:
    """Sorted row indices, at most ``max_points``, keeping group proportions.

    Each group gets ``floor`` of its share; leftover slots go to the groups
    with the largest remainders, earliest group first on ties.
    """
    groups = np.asarray(groups, dtype=object)
    n = groups.shape[0]
    if n <= max_points:
        return np.arange(n)
    names = list(dict.fromkeys(groups.tolist()))
    sizes = np.array([(groups == g).sum() for g in names])
    share = sizes * max_points / n
    take = np.floor(share).astype(int)
    left = max_points - take.sum()
    order = np.argsort(-(share - take), kind="stable")
    take[order[:left]] += 1
    rng = np.random.default_rng(seed)
    picked = [rng.choice(np.flatnonzero(groups == g), size=t, replace=False) for g, t in zip(names, take)]
    return np.sort(np.concatenate(picked))


def write_embedding_csv(ids: Sequence[str], coords: np.ndarray, path, variants: Sequence | None = None,
                        clusters: Sequence | None = None, meta: dict | None = None) -> None:
    n = len(ids)
    variants = variants if variants is not None else [""] * n
    clusters = clusters if clusters is not None else [""] * n
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if meta:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("id,x,y,variant,cluster\n")
        for i, (x, y), v, c in zip(ids, coords, variants, clusters):
            fh.write(f"{i},{float(x)!r},{float(y)!r},{v},{c}\n")


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def write_embedding_svg(coords: np.ndarray, groups: Sequence, path, size: int = 600,
                        title: str = "") -> None:
    """Scatter plot, one colour per group, with a legend."""
    coords = np.asarray(coords, dtype=np.float64)
    names = list(dict.fromkeys(str(g) for g in groups))
    colour = {g: _PALETTE[i % len(_PALETTE)] for i, g in enumerate(names)}
    pad = 40
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    xy = pad + (coords - lo) / span * (size - 2 * pad)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + 140}" height="{size}">',
           f'<rect width="{size + 140}" height="{size}" fill="white"/>']
    if title:
        out.append(f'<text x="{pad}" y="20" font-size="14">{escape(title)}</text>')
    for (x, y), g in zip(xy, groups):
        out.append(f'<circle cx="{x:.2f}" cy="{size - y:.2f}" r="2.5" fill="{colour[str(g)]}" fill-opacity="0.7"/>')
    for i, g in enumerate(names):
        y = pad + 18 * i
        out.append(f'<circle cx="{size + 10}" cy="{y}" r="5" fill="{colour[g]}"/>')
        out.append(f'<text x="{size + 20}" y="{y + 4}" font-size="12">{escape(g)}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
