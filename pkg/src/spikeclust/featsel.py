"""Dimensionality reduction and supervised feature selection.

Three methods share this module:

* random Fourier features, an unsupervised projection whose inner products
  approximate the Gaussian kernel ``exp(-gamma * |x - y|^2)``;
* Lasso by cyclic coordinate descent, extended to several classes by
  fitting one ``+1/-1`` indicator per class and taking the union of the
  non-zero coefficients;
* Boruta, which keeps features whose random-forest importance beats the
  best row-permuted "shadow" copy significantly often.

Lasso and Boruta use the variant labels, so anything clustered on their
output has seen the answers. That is deliberate here; keep it in mind when
reading F1 scores built on top of them.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .featurize import FeatureMatrix
from .randforest import ForestParams, rf_fit, rf_importances

log = logging.getLogger(__name__)


def _values(X) -> np.ndarray:
    return np.asarray(getattr(X, "values", X), dtype=np.float64)


# -- random Fourier features -------------------------------------------------

@dataclass(eq=False)
class RffModel:
    W: np.ndarray
    b: np.ndarray
    gamma: float
    D: int
    seed: int

    @property
    def d(self) -> int:
        return self.W.shape[1]


def rff_fit(d: int, D: int = 512, gamma: Optional[float] = None, seed: int = 0) -> RffModel:
    """Sample projection frequencies for the Gaussian kernel of width ``gamma``.

    ``gamma`` defaults to ``1/d``. Rows of ``W`` are drawn from N(0, 2*gamma*I),
    the kernel's spectral density; offsets are uniform on [0, 2*pi).
    """
    if d < 1 or D < 1:
        raise ValueError(f"dimensions must be >= 1, got d={d}, D={D}")
    gamma = 1.0 / d if gamma is None else float(gamma)
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    rng = np.random.default_rng(seed)
    W = rng.normal(0.0, np.sqrt(2.0 * gamma), size=(D, d))
    b = rng.uniform(0.0, 2.0 * np.pi, size=D)
    return RffModel(W, b, gamma, D, seed)


def rff_transform(model: RffModel, X):
    """``z(x) = sqrt(2/D) cos(W x + b)`` row by row.

    A FeatureMatrix in gives a FeatureMatrix out (columns ``rff_0..``);
    a bare array gives an array.
    """
    V = _values(X)
    if V.ndim != 2 or V.shape[1] != model.d:
        raise ValueError(f"model expects {model.d} columns, got shape {V.shape}")
    Z = np.sqrt(2.0 / model.D) * np.cos(V @ model.W.T + model.b)
    if isinstance(X, FeatureMatrix):
        return FeatureMatrix(Z, [f"rff_{i}" for i in range(model.D)], X.row_ids, 0)
    return Z


def median_gamma(X, max_rows: int = 1000, seed: int = 0) -> float:
    """``1 / median(|x_i - x_j|^2)`` over a row sample; the usual bandwidth heuristic."""
    V = _values(X)
    if V.shape[0] > max_rows:
        V = V[np.random.default_rng(seed).choice(V.shape[0], max_rows, replace=False)]
    sq = (V ** 2).sum(1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2 * V @ V.T, 0)
    med = np.median(D2[np.triu_indices(V.shape[0], 1)])
    if med <= 0:
        raise ValueError("median squared distance is zero; cannot pick a bandwidth")
    return 1.0 / med


# -- Lasso -------------------------------------------------------------------

@dataclass(eq=False)
class LassoModel:
    beta: np.ndarray          # on the original column scale
    intercept: float
    alpha: float
    n_iters: int
    converged: bool
    beta_std: np.ndarray      # on the standardized scale the penalty acts on
    objective_history: list = field(default_factory=list)


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _standardize(V: np.ndarray, standardize: bool):
    """Center columns, and scale them to unit variance when ``standardize``."""
    mu = V.mean(axis=0)
    sd = V.std(axis=0)
    const = sd == 0
    scale = np.where(const | (not standardize), 1.0, sd)
    Xs = np.asfortranarray((V - mu) / scale)
    Xs[:, const] = 0.0
    return Xs, mu, scale, const


def _objective(r: np.ndarray, beta: np.ndarray, alpha: float, n: int) -> float:
    return float(r @ r) / (2 * n) + alpha * float(np.abs(beta).sum())


GRAM_MAX = 512


def _sweeps_residual(Xs, colsq, work, beta, r, alpha, tol, budget, history):
    """Plain cyclic sweeps over ``work`` updating the residual in place."""
    n = Xs.shape[0]
    done = 0
    while done < budget:
        max_change = 0.0
        for j in work:
            xj = Xs[:, j]
            bj = beta[j]
            new = soft_threshold(xj @ r / n + colsq[j] * bj, alpha) / colsq[j]
            if new != bj:
                r -= xj * (new - bj)
                beta[j] = new
                max_change = max(max_change, abs(new - bj))
        done += 1
        history.append(_objective(r, beta, alpha, n))
        if max_change < tol:
            return done, True
    return done, False


def _sweeps_gram(Xs, work, beta, r, alpha, tol, budget, history):
    """Cyclic sweeps over a small working set using its Gram matrix.

    Each coordinate update costs O(len(work)) instead of O(n); the residual
    is rebuilt once at the end.
    """
    n = Xs.shape[0]
    Xw = Xs[:, work]
    bw = beta[work].copy()
    r0 = r + Xw @ bw                      # residual with the working set zeroed
    G = Xw.T @ Xw / n
    c = Xw.T @ r0 / n
    base = float(r0 @ r0) / (2 * n)
    diag = np.diag(G).copy()
    done = 0
    ok = False
    while done < budget:
        max_change = 0.0
        for j in range(bw.shape[0]):
            bj = bw[j]
            rho = c[j] - G[j] @ bw + diag[j] * bj
            new = soft_threshold(rho, alpha) / diag[j]
            if new != bj:
                bw[j] = new
                max_change = max(max_change, abs(new - bj))
        done += 1
        history.append(base - float(c @ bw) + 0.5 * float(bw @ G @ bw) + alpha * float(np.abs(bw).sum()))
        if max_change < tol:
            ok = True
            break
    beta[work] = bw
    r[:] = r0 - Xw @ bw
    return done, ok


def _coordinate_descent(Xs, colsq, usable, yc, alpha, tol, max_iters):
    """Active-set cyclic coordinate descent.

    Sweeps run over the current non-zeros plus any zero coefficient whose
    gradient breaks the KKT bound; the fit has converged once a working set
    has settled (largest coefficient change below ``tol``) and no zero
    coefficient violates ``|x_j.r/n| <= alpha + tol``. Every sweep appends the
    objective to the history.
    """
    n, d = Xs.shape
    beta = np.zeros(d)
    r = yc.copy()
    history = [_objective(r, beta, alpha, n)]
    sweeps = 0
    converged = False
    while sweeps < max_iters:
        grad = Xs.T @ r / n
        # entering from zero would move beta_j by (|grad_j| - alpha) / colsq_j
        violators = usable & (beta == 0) & (np.abs(grad) > alpha + tol * colsq)
        if sweeps > 0 and not violators.any():
            converged = True
            break
        work = np.flatnonzero(usable & ((beta != 0) | violators))
        budget = max_iters - sweeps
        if work.size <= GRAM_MAX:
            done, ok = _sweeps_gram(Xs, work, beta, r, alpha, tol, budget, history)
        else:
            done, ok = _sweeps_residual(Xs, colsq, work, beta, r, alpha, tol, budget, history)
        sweeps += done
        if not ok:
            break
    return beta, r, sweeps, converged, history


def lasso_fit(X, y, alpha: float = 0.1, tol: float = 1e-4, max_iters: int = 10000,
              standardize: bool = True) -> LassoModel:
    """Minimize ``(1/2n)|y - b0 - X b|^2 + alpha |b|_1`` by coordinate descent.

    Columns are centered and scaled to unit (population) variance first, so
    ``alpha`` acts on standardized coefficients; constant columns get a zero
    coefficient. ``beta`` is mapped back to the original scale. Hitting
    ``max_iters`` sweeps leaves ``converged=False``.
    """
    V = _values(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if V.ndim != 2 or V.shape[0] < 1:
        raise ValueError(f"need a non-empty 2-d matrix, got shape {V.shape}")
    if y.shape[0] != V.shape[0]:
        raise ValueError(f"{V.shape[0]} rows but {y.shape[0]} targets")
    if not (np.isfinite(V).all() and np.isfinite(y).all()):
        raise ValueError("inputs contain non-finite values")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    Xs, mu, sd, const = _standardize(V, standardize)
    return _fit_standardized(Xs, mu, sd, const, y, alpha, tol, max_iters)


def _fit_standardized(Xs, mu, sd, const, y, alpha, tol, max_iters):
    n = Xs.shape[0]
    colsq = np.einsum("ij,ij->j", Xs, Xs) / n
    usable = (~const) & (colsq > 0)
    colsq = np.where(usable, colsq, 1.0)
    ybar = float(y.mean())
    yc = y - ybar
    beta_s, _, sweeps, converged, history = _coordinate_descent(Xs, colsq, usable, yc, alpha, tol, max_iters)
    beta = beta_s / sd
    intercept = ybar - float(beta @ mu)
    return LassoModel(beta, intercept, float(alpha), sweeps, converged, beta_s, history)


@dataclass
class LassoSelection:
    selected: list
    per_class: dict
    alpha: float


def lasso_select(X, labels: Sequence, alpha: float = 0.1, tol: float = 1e-4,
                 max_iters: int = 10000) -> LassoSelection:
    """One-vs-rest Lasso; the union of columns with a non-zero coefficient."""
    V = _values(X)
    labels = np.asarray(labels)
    if labels.shape[0] != V.shape[0]:
        raise ValueError(f"{V.shape[0]} rows but {labels.shape[0]} labels")
    if any(lab is None for lab in labels.tolist()):
        raise ValueError("every row needs a label for lasso selection")
    classes = list(dict.fromkeys(labels.tolist()))
    if len(classes) < 2:
        raise ValueError("lasso selection needs at least two classes")
    Xs, mu, sd, const = _standardize(V, True)
    chosen: set[int] = set()
    per_class = {}
    for c in sorted(classes, key=str):
        y = np.where(labels == c, 1.0, -1.0)
        m = _fit_standardized(Xs, mu, sd, const, y, alpha, tol, max_iters)
        if not m.converged:
            log.warning("lasso for class %s stopped after %d sweeps without converging", c, m.n_iters)
        nz = np.flatnonzero(m.beta_std != 0)
        per_class[str(c)] = int(nz.size)
        chosen.update(nz.tolist())
    return LassoSelection(sorted(chosen), per_class, float(alpha))


# -- Boruta ------------------------------------------------------------------

@dataclass(eq=False)
class BorutaResult:
    accepted: set
    rejected: set
    tentative: set
    hits: np.ndarray                  # total hits per feature
    hit_history: np.ndarray           # (n_iters, d) 0/1 hits per iteration
    max_shadow_history: list

    @property
    def n_iters(self) -> int:
        return self.hit_history.shape[0]


def boruta_run(X, labels: Sequence, n_iters: int = 100, forest: ForestParams = ForestParams(),
               level: float = 0.05, seed: int = 0) -> BorutaResult:
    """All-relevant feature selection against permuted shadow features.

    Every iteration appends an independently row-permuted copy of each
    feature, fits a forest on the doubled matrix and records a hit for each
    real feature whose importance beats the largest shadow importance. After
    ``n_iters`` rounds the hit counts are tested against Binomial(n_iters, 1/2)
    with a Bonferroni-corrected ``level``: significantly many hits accept,
    significantly few reject, anything else stays tentative.

    Constant columns can never be split on, so they are rejected up front and
    left out of the forests.
    """
    V = _values(X)
    labels = np.asarray(labels)
    n, d = V.shape
    if d < 1:
        raise ValueError("need at least one feature")
    if labels.shape[0] != n:
        raise ValueError(f"{n} rows but {labels.shape[0]} labels")
    if np.unique(labels).shape[0] < 2:
        raise ValueError("Boruta needs at least two classes")
    if n_iters < 5:
        raise ValueError(f"n_iters must be >= 5 for the binomial test, got {n_iters}")

    live = np.flatnonzero(V.max(axis=0) > V.min(axis=0))
    hit_history = np.zeros((n_iters, d), dtype=np.uint8)
    max_shadow = []
    rng = np.random.default_rng(seed)
    iter_seeds = rng.integers(0, 2 ** 31 - 1, size=n_iters)
    if live.size:
        Vl = V[:, live]
        for it in range(n_iters):
            irng = np.random.default_rng(int(iter_seeds[it]))
            shadow = irng.permuted(Vl, axis=0)
            params = ForestParams(forest.n_trees, forest.max_depth, forest.min_leaf, forest.mtry,
                                  int(irng.integers(0, 2 ** 31 - 1)))
            model = rf_fit(np.hstack([Vl, shadow]), labels, params)
            imp = rf_importances(model)
            real, shad = imp[:live.size], imp[live.size:]
            m = float(shad.max())
            max_shadow.append(m)
            hit_history[it, live] = real > m
    else:
        max_shadow = [0.0] * n_iters

    hits = hit_history.sum(axis=0).astype(np.int64)
    p_accept = stats.binom.sf(hits - 1, n_iters, 0.5)
    p_reject = stats.binom.cdf(hits, n_iters, 0.5)
    cutoff = level / d
    accept = p_accept < cutoff
    reject = (p_reject < cutoff) & ~accept
    accept[np.setdiff1d(np.arange(d), live)] = False
    reject[np.setdiff1d(np.arange(d), live)] = True
    accepted = set(np.flatnonzero(accept).tolist())
    rejected = set(np.flatnonzero(reject).tolist())
    tentative = set(range(d)) - accepted - rejected
    return BorutaResult(accepted, rejected, tentative, hits, hit_history, max_shadow)


# -- selector records ----------------------------------------------------------

def selector_record(method: str, params: dict, seed: int, fm: FeatureMatrix | None = None,
                    selected: Sequence[int] | None = None, projection_dims: int | None = None) -> dict:
    rec = {"method": method, "params": params, "seed": seed}
    if projection_dims is not None:
        rec["projection_dims"] = projection_dims
    else:
        ids = fm.column_ids if fm is not None else None
        rec["selected_column_ids"] = [ids[i] for i in selected] if ids else list(selected)
    return rec


def write_selector_json(rec: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(rec, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_selector_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        rec = json.load(fh)
    if "method" not in rec:
        raise ValueError(f"{path}: selector record has no 'method'")
    return rec


def apply_selector(rec: dict, fm: FeatureMatrix) -> FeatureMatrix:
    """Re-apply a stored selector to a feature matrix with the same columns."""
    method = rec["method"]
    if method == "none":
        return fm
    if method == "rff":
        p = rec["params"]
        model = rff_fit(fm.shape[1], int(rec["projection_dims"]), float(p["gamma"]), int(rec["seed"]))
        return rff_transform(model, fm)
    pos = {c: i for i, c in enumerate(fm.column_ids)}
    missing = [c for c in rec["selected_column_ids"] if c not in pos]
    if missing:
        raise ValueError(f"selector names {len(missing)} column(s) not in the matrix, e.g. {missing[0]!r}")
    out = fm.select_columns([pos[c] for c in rec["selected_column_ids"]])
    return FeatureMatrix(out.values, out.column_ids, out.row_ids, fm.k)
