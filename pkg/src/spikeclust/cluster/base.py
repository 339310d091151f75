"""Result types shared by the clustering algorithms, and their CSV formats."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

NOISE = -1


@dataclass(eq=False)
class HardClustering:
    """One cluster id per point plus the fitted centers.

    ``distortion`` is the method's own objective at the returned solution:
    summed squared Euclidean distance for k-means and agglomerative cuts,
    summed simple-matching dissimilarity for k-modes. ``history`` holds the
    objective after each iteration of the winning restart.
    """
    assignments: np.ndarray
    centers: np.ndarray
    distortion: float
    iterations: int
    seed: Optional[int] = None
    history: list = field(default_factory=list)
    method: str = ""

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0]

    @property
    def labels(self) -> np.ndarray:
        return self.assignments


@dataclass(eq=False)
class FuzzyClustering:
    membership: np.ndarray
    centers: np.ndarray
    m: float
    objective: float
    iterations: int
    seed: Optional[int] = None
    history: list = field(default_factory=list)
    method: str = "fuzzy"

    @property
    def labels(self) -> np.ndarray:
        """Hard labels by largest membership (lowest cluster id on ties)."""
        return self.membership.argmax(axis=1)


@dataclass(eq=False)
class DensityClustering:
    labels: np.ndarray                # NOISE for noise points
    membership_score: np.ndarray
    condensed_tree: np.ndarray        # structured: parent, child, lambda_val, child_size
    stabilities: dict
    selected: list                    # condensed-tree ids of the flat clusters, by label
    min_cluster_size: int
    min_samples: int
    method: str = "hdbscan"

    @property
    def n_clusters(self) -> int:
        return len(self.selected)


@dataclass(eq=False)
class Dendrogram:
    """Merge list in the usual linkage-matrix layout.

    Row ``i`` merges nodes ``left`` and ``right`` (points are ``0..n-1``,
    row ``i`` creates node ``n+i``) at ``distance`` into ``size`` points.
    """
    merges: np.ndarray   # (n-1, 4): left, right, distance, size
    linkage: str

    @property
    def n_points(self) -> int:
        return self.merges.shape[0] + 1


def centers_and_distortion(X: np.ndarray, labels: np.ndarray, K: int):
    centers = np.zeros((K, X.shape[1]))
    for k in range(K):
        members = X[labels == k]
        if members.shape[0]:
            centers[k] = members.mean(axis=0)
    distortion = float(((X - centers[labels]) ** 2).sum())
    return centers, distortion


# -- output files --------------------------------------------------------------

def _comment(fh, meta):
    if meta:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")


def write_assignments_csv(ids: Sequence[str], labels: Sequence[int], path, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        _comment(fh, meta)
        fh.write("id,cluster\n")
        for i, c in zip(ids, labels):
            fh.write(f"{i},{int(c)}\n")


def read_assignments_csv(path) -> dict[str, int]:
    out: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        header_seen = False
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                header_seen = True
                if line.split(",")[:2] != ["id", "cluster"]:
                    raise ValueError(f"{path}:{lineno}: expected header 'id,cluster'")
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'id,cluster', got {line!r}")
            try:
                out[parts[0]] = int(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cluster id {parts[1]!r} is not an integer") from None
    return out


def write_membership_csv(ids: Sequence[str], membership: np.ndarray, path, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        _comment(fh, meta)
        fh.write("id," + ",".join(f"u_{j}" for j in range(membership.shape[1])) + "\n")
        for i, row in zip(ids, membership):
            fh.write(i + "," + ",".join(repr(float(v)) for v in row) + "\n")


def write_dendrogram_csv(dendro: Dendrogram, path, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        _comment(fh, meta)
        fh.write("left,right,distance,size\n")
        for left, right, dist, size in dendro.merges:
            fh.write(f"{int(left)},{int(right)},{float(dist)!r},{int(size)}\n")
