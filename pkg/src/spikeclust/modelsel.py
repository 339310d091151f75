"""Choosing the number of clusters: distortion sweeps and knee detection."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cluster.kmeans import kmeans


@dataclass
class ElbowCurve:
    ks: list
    distortions: list
    runtimes_sec: list = field(default_factory=list)
    chosen_k: Optional[int] = None

    def __post_init__(self):
        if len(self.ks) != len(self.distortions):
            raise ValueError("ks and distortions differ in length")
        if self.runtimes_sec and len(self.runtimes_sec) != len(self.ks):
            raise ValueError("runtimes_sec and ks differ in length")
        if any(b <= a for a, b in zip(self.ks, self.ks[1:])):
            raise ValueError("ks must be strictly increasing")


def distortion_sweep(X, k_min: int = 2, k_max: int = 14, max_iters: int = 300, tol: float = 1e-4,
                     n_init: int = 10, seed: int = 0, timings: bool = True) -> ElbowCurve:
    """k-means distortion for every K in ``[k_min, k_max]``, same seed at each K.

    Runs serially so each wall-clock span covers one full best-of-``n_init``
    fit and nothing else.
    """
    V = np.asarray(getattr(X, "values", X), dtype=np.float64)
    n = V.shape[0]
    if k_min < 1 or k_max < k_min or k_max > n:
        raise ValueError(f"need 1 <= k_min <= k_max <= n={n}, got [{k_min}, {k_max}]")
    ks, dist, secs = [], [], []
    for K in range(k_min, k_max + 1):
        t0 = time.perf_counter()
        res = kmeans(V, K, max_iters=max_iters, tol=tol, n_init=n_init, seed=seed)
        elapsed = time.perf_counter() - t0
        ks.append(K)
        dist.append(res.distortion)
        secs.append(elapsed if timings else None)
    return ElbowCurve(ks, dist, secs)


_FLAT = 1e-10


def _local_maxima(y: np.ndarray) -> np.ndarray:
    return np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])) + 1


def _local_minima(y: np.ndarray) -> np.ndarray:
    return np.flatnonzero((y[1:-1] < y[:-2]) & (y[1:-1] < y[2:])) + 1


def kneedle(curve: ElbowCurve, sensitivity: float = 1.0) -> Optional[int]:
    """Knee of a decreasing convex curve, or None.

    Both axes are scaled to [0, 1] and the curve is flipped to increasing
    concave, so the difference curve is ``1 - y - x``. Each local maximum of
    the difference sets a threshold ``peak - sensitivity * mean(dx)``; the
    first maximum whose difference curve falls below its threshold before
    the next maximum is the knee.
    """
    x = np.asarray(curve.ks, dtype=np.float64)
    y = np.asarray(curve.distortions, dtype=np.float64)
    if x.shape[0] < 3:
        raise ValueError(f"need at least 3 points, got {x.shape[0]}")
    if np.ptp(y) == 0:
        return None
    xn = (x - x.min()) / np.ptp(x)
    yn = (y - y.min()) / np.ptp(y)
    diff = 1.0 - yn - xn
    # a straight line leaves only rounding noise, which must not form peaks
    diff[np.abs(diff) < _FLAT] = 0.0
    peaks = _local_maxima(diff)
    if peaks.size == 0:
        return None
    troughs = set(_local_minima(diff).tolist())
    step = float(np.diff(xn).mean())
    peak_set = set(peaks.tolist())
    knee = None
    threshold = None
    for i in range(int(peaks[0]), x.shape[0]):
        if i in peak_set:
            knee = i
            threshold = diff[i] - sensitivity * step
            continue
        if i in troughs:
            threshold = 0.0
        if threshold is not None and diff[i] < threshold:
            return int(curve.ks[knee])
    return None


def choose_k(curve: ElbowCurve, n_variants_hint: Optional[int] = None,
             sensitivity: float = 1.0) -> int:
    """The hint when given, otherwise the knee."""
    if n_variants_hint is not None:
        return int(n_variants_hint)
    k = kneedle(curve, sensitivity)
    if k is None:
        raise ValueError("no knee found in the distortion curve and no K hint given")
    return k


def with_choice(curve: ElbowCurve, k: Optional[int]) -> ElbowCurve:
    return replace(curve, chosen_k=k)


def write_elbow_csv(curve: ElbowCurve, path, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if meta:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("k,distortion,runtime_sec,chosen\n")
        runtimes = curve.runtimes_sec or [None] * len(curve.ks)
        for k, d, t in zip(curve.ks, curve.distortions, runtimes):
            rt = "" if t is None else f"{t:.6f}"
            fh.write(f"{k},{float(d)!r},{rt},{int(k == curve.chosen_k)}\n")


def read_elbow_csv(path) -> ElbowCurve:
    ks, dist, secs, chosen = [], [], [], None
    with open(path, encoding="utf-8") as fh:
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not rows or rows[0] != "k,distortion,runtime_sec,chosen":
        raise ValueError(f"{path}: expected header 'k,distortion,runtime_sec,chosen'")
    for lineno, row in enumerate(rows[1:], start=2):
        parts = row.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}: row {lineno}: expected 4 fields, got {row!r}")
        ks.append(int(parts[0]))
        dist.append(float(parts[1]))
        secs.append(float(parts[2]) if parts[2] else None)
        if parts[3] == "1":
            chosen = ks[-1]
    return ElbowCurve(ks, dist, secs, chosen)
