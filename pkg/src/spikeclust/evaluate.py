"""Scoring clusterings against known variants, and timing the clustering methods."""
from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .cluster import NOISE, run_method

VARIANT_ORDER = ("Alpha", "Beta", "Delta", "Gamma", "Epsilon")
UNASSIGNED = "unassigned"
NOISE_LABEL = "noise"


def order_variants(names) -> list[str]:
    """Known variants in their fixed order, anything else alphabetically after."""
    names = set(names)
    known = [v for v in VARIANT_ORDER if v in names]
    return known + sorted(names - set(VARIANT_ORDER))


@dataclass(eq=False)
class ContingencyTable:
    variants: list
    clusters: list
    counts: np.ndarray   # (len(variants), len(clusters))

    def column(self, cluster) -> np.ndarray:
        return self.counts[:, self.clusters.index(cluster)]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class EvaluationReport:
    table: ContingencyTable
    cluster_label: dict
    f1_per_variant: dict
    overall_weighted_f1: float
    precision: dict = field(default_factory=dict)
    recall: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


def contingency(assignments: Mapping[str, int], truth: Mapping[str, str],
                clusters: Optional[Sequence[int]] = None) -> ContingencyTable:
    """Variant-by-cluster counts over ids present in both mappings.

    Noise (-1) becomes a column of its own when it occurs. ``clusters``
    forces extra (possibly empty) columns.
    """
    common = [i for i in assignments if i in truth]
    if not common:
        raise ValueError("no sequence id appears in both the clustering and the truth labels")
    missing = len(assignments) - len(common)
    if missing:
        warnings.warn(f"{missing} clustered ids have no truth label and were left out", stacklevel=2)
    variants = order_variants(truth[i] for i in common)
    cols = set(int(assignments[i]) for i in common)
    if clusters is not None:
        cols |= set(int(c) for c in clusters)
    cols = sorted(c for c in cols if c != NOISE) + ([NOISE] if NOISE in cols else [])
    v_index = {v: j for j, v in enumerate(variants)}
    c_index = {c: j for j, c in enumerate(cols)}
    counts = np.zeros((len(variants), len(cols)), dtype=np.int64)
    for i in common:
        counts[v_index[truth[i]], c_index[int(assignments[i])]] += 1
    return ContingencyTable(variants, cols, counts)


def majority_label(table: ContingencyTable) -> dict:
    """Label each cluster with its most frequent variant.

    Ties go to the earlier variant in table order; an empty column is
    ``"unassigned"`` and the noise column is ``"noise"``.
    """
    out = {}
    for j, c in enumerate(table.clusters):
        col = table.counts[:, j]
        if c == NOISE:
            out[c] = NOISE_LABEL
        elif col.sum() == 0:
            out[c] = UNASSIGNED
        else:
            out[c] = table.variants[int(np.argmax(col))]
    return out


def f1_report(table: ContingencyTable, labeling: Optional[dict] = None,
              timings: Optional[dict] = None) -> EvaluationReport:
    """Per-variant precision, recall and F1 of the cluster-induced prediction.

    The overall score weights each variant's F1 by its share of sequences.
    """
    labeling = majority_label(table) if labeling is None else labeling
    missing = [c for c in table.clusters if c not in labeling]
    if missing:
        raise ValueError(f"labeling does not cover clusters {missing}")
    pred = np.array([labeling[c] for c in table.clusters], dtype=object)
    n_v = table.counts.sum(axis=1)
    n = int(n_v.sum())
    col_tot = table.counts.sum(axis=0)
    prec, rec, f1 = {}, {}, {}
    overall = 0.0
    for j, v in enumerate(table.variants):
        mine = pred == v
        tp = float(table.counts[j, mine].sum())
        predicted = float(col_tot[mine].sum())
        p = tp / predicted if predicted else 0.0
        r = tp / n_v[j] if n_v[j] else 0.0
        prec[v], rec[v] = p, r
        f1[v] = 2 * p * r / (p + r) if p + r > 0 else 0.0
        overall += n_v[j] / n * f1[v]
    return EvaluationReport(table, dict(labeling), f1, float(overall), prec, rec, dict(timings or {}))


def report_dict(report: EvaluationReport, method: str, feature_selection: str, k: int,
                config: Optional[dict] = None, include_f1: bool = True) -> dict:
    t = report.table
    out = {
        "method": method,
        "feature_selection": feature_selection,
        "k": k,
        "f1_per_variant": report.f1_per_variant if include_f1 else None,
        "overall_weighted_f1": report.overall_weighted_f1 if include_f1 else None,
        "contingency": {
            "variants": list(t.variants),
            "clusters": [int(c) for c in t.clusters],
            "counts": t.counts.tolist(),
        },
        "cluster_label": {str(c): v for c, v in report.cluster_label.items()},
        "timings": report.timings,
    }
    if config is not None:
        out["config"] = config
    return out


def write_report_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _col_name(c) -> str:
    return NOISE_LABEL if c == NOISE else str(c)


def write_contingency_csv(table: ContingencyTable, path, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if meta:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("variant," + ",".join(_col_name(c) for c in table.clusters) + "\n")
        for v, row in zip(table.variants, table.counts):
            fh.write(v + "," + ",".join(str(int(x)) for x in row) + "\n")


# -- runtime benchmark ---------------------------------------------------------

@dataclass
class BenchRow:
    method: str
    k: int
    seed: int
    seconds: Optional[float]
    error: Optional[str] = None


def bench(X, methods: Sequence[str], K, seeds: Sequence[int] = (0, 1, 2),
          params: Optional[dict] = None) -> list[BenchRow]:
    """Wall-clock seconds for every (method, K, seed), run serially.

    ``K`` may be one value or a list. A method that raises is recorded with
    its error message instead of aborting the run.
    """
    if not methods:
        raise ValueError("no methods to benchmark")
    ks = [K] if np.isscalar(K) else list(K)
    params = params or {}
    rows = []
    for method in methods:
        for k in ks:
            for seed in seeds:
                t0 = time.perf_counter()
                try:
                    run_method(method, X, int(k), seed=seed, **params.get(method, {}))
                except Exception as exc:  # recorded, not raised
                    rows.append(BenchRow(method, int(k), seed, None, f"{type(exc).__name__}: {exc}"))
                    continue
                rows.append(BenchRow(method, int(k), seed, time.perf_counter() - t0))
    return rows


def bench_summary(rows: Sequence[BenchRow]) -> dict:
    """Mean seconds per method over its successful runs."""
    out: dict = {}
    for r in rows:
        if r.seconds is not None:
            out.setdefault(r.method, []).append(r.seconds)
    return {m: float(np.mean(v)) for m, v in out.items()}


def write_bench_csv(rows: Sequence[BenchRow], path, meta: dict | None = None) -> None:
    """``method,k,seed,seconds``; a failed run has an empty ``seconds`` and
    its error listed in the header comment."""
    meta = dict(meta or {})
    failures = [f"{r.method} k={r.k} seed={r.seed}: {r.error}" for r in rows if r.error]
    if failures:
        meta["failures"] = failures
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if meta:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("method,k,seed,seconds\n")
        for r in rows:
            s = "" if r.seconds is None else f"{r.seconds:.6f}"
            fh.write(f"{r.method},{r.k},{r.seed},{s}\n")
