"""Clustering algorithms over feature matrices."""
from .agglomerative import LINKAGES, agglomerative, cut_tree, linkage_tree
from .base import (NOISE, DensityClustering, Dendrogram, FuzzyClustering, HardClustering,
                   read_assignments_csv, write_assignments_csv, write_dendrogram_csv,
                   write_membership_csv)
from .fuzzy import fuzzy_cmeans
from .hdbscan import hdbscan, mutual_reachability_mst
from .kmeans import kmeans
from .kmodes import kmodes

METHODS = ("kmeans", "kmodes", "fuzzy", "agglomerative", "hdbscan")

__all__ = [
    "LINKAGES", "METHODS", "NOISE", "DensityClustering", "Dendrogram", "FuzzyClustering",
    "HardClustering", "agglomerative", "cut_tree", "fuzzy_cmeans", "hdbscan", "kmeans", "kmodes",
    "linkage_tree", "mutual_reachability_mst", "read_assignments_csv", "write_assignments_csv",
    "run_method", "write_dendrogram_csv", "write_membership_csv",
]


def run_method(method: str, X, K: int, seed: int = 0, **params):
    """Dispatch by name. Every result exposes ``.labels``; agglomerative
    returns its flat cut (the tree is available via ``agglomerative``)."""
    if method == "kmeans":
        return kmeans(X, K, seed=seed, **params)
    if method == "kmodes":
        return kmodes(X, K, seed=seed, **params)
    if method == "fuzzy":
        return fuzzy_cmeans(X, K, seed=seed, **params)
    if method == "agglomerative":
        return agglomerative(X, K, **params)[1]
    if method == "hdbscan":
        return hdbscan(X, **params)
    raise ValueError(f"unknown clustering method {method!r}; expected one of {METHODS}")
