import importlib
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import cdist

from conftest import make_blobs
from spikeclust.cluster import NOISE, agglomerative, cut_tree, hdbscan, linkage_tree, mutual_reachability_mst
from spikeclust.cluster.hdbscan import core_distances, mutual_reachability, pairwise_distances


def kruskal_weight(X, min_samples):
    """Brute-force MST weight over every pair, with distances from cdist."""
    D = cdist(X, X)
    core = np.sort(D, axis=1)[:, min_samples - 1]
    n = len(X)
    edges = sorted((max(core[i], core[j], D[i, j]), i, j) for i, j in itertools.combinations(range(n), 2))
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    total, used = 0.0, 0
    for w, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            total += w
            used += 1
    assert used == n - 1
    return total


# -- agglomerative -------------------------------------------------------------

@pytest.mark.parametrize("kind", ["single", "complete", "average", "ward"])
def test_linkage_matches_scipy(kind):
    X = np.random.default_rng(7).normal(size=(60, 4))
    ours = linkage_tree(X, kind).merges
    ref = linkage(X, kind)
    assert np.allclose(ours[:, 2], ref[:, 2], rtol=1e-10, atol=1e-12)
    assert np.array_equal(ours[:, [0, 1, 3]], ref[:, [0, 1, 3]])
    for K in (2, 5, 11):
        ours_cut = cut_tree(linkage_tree(X, kind), K)
        ref_cut = fcluster(ref, K, criterion="maxclust")
        assert len(set(zip(ours_cut, ref_cut))) == K


@given(st.integers(0, 10_000), st.sampled_from(["single", "complete", "average", "ward"]))
def test_merge_distances_nondecreasing(seed, kind):
    X = np.random.default_rng(seed).normal(size=(25, 3))
    d = linkage_tree(X, kind).merges[:, 2]
    assert np.all(np.diff(d) >= -1e-12)


def test_agglomerative_small_examples():
    d, hc = agglomerative(np.array([[0.0], [1.0], [10.0]]), 2, linkage="single")
    assert tuple(d.merges[0]) == (0, 1, 1.0, 2)
    assert list(hc.labels) == [0, 0, 1]
    for kind in ("single", "complete", "average", "ward"):
        d, _ = agglomerative(np.array([[0.0, 0.0], [3.0, 4.0]]), 1, linkage=kind)
        assert d.merges.shape == (1, 4) and d.merges[0, 2] == pytest.approx(5.0)
    _, hc = agglomerative(np.random.default_rng(0).normal(size=(7, 2)), 7)
    assert sorted(hc.labels) == list(range(7))


def test_agglomerative_errors_and_guard(monkeypatch):
    X = np.zeros((4, 2))
    with pytest.raises(ValueError):
        agglomerative(X, 5)
    with pytest.raises(ValueError):
        agglomerative(X, 2, linkage="median")
    ag = importlib.import_module("spikeclust.cluster.agglomerative")
    monkeypatch.setattr(ag, "MAX_POINTS", 3)
    with pytest.raises(ValueError, match="allow_large"):
        agglomerative(X, 2)
    assert agglomerative(X, 2, allow_large=True)[1].labels.shape == (4,)


# -- HDBSCAN -------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(10))
def test_mst_weight_matches_kruskal(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 51))
    X = rng.normal(size=(n, int(rng.integers(1, 6))))
    ms = int(rng.integers(1, min(n, 6) + 1))
    edges = mutual_reachability_mst(X, ms)
    assert edges.shape == (n - 1, 3)
    assert edges[:, 2].sum() == pytest.approx(kruskal_weight(X, ms), rel=1e-12)


def test_mst_examples():
    path = mutual_reachability_mst(np.arange(6.0)[:, None], 1)
    assert sorted(tuple(sorted(e[:2].astype(int))) for e in path) == [(i, i + 1) for i in range(5)]
    assert np.all(path[:, 2] == 1.0)
    two = mutual_reachability_mst(np.array([[0.0, 0.0], [3.0, 4.0]]), 2)
    assert two.shape == (1, 3) and two[0, 2] == pytest.approx(5.0)


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_mutual_reachability_dominates_core(seed, ms):
    X = np.random.default_rng(seed).normal(size=(12, 2))
    D = pairwise_distances(X)
    core = core_distances(D, ms)
    M = mutual_reachability(D, core)
    off = ~np.eye(12, dtype=bool)
    assert np.all(M[off] >= np.maximum.outer(core, core)[off])
    assert np.all(M >= D - 1e-12)


def test_hdbscan_two_blobs_with_noise():
    rng = np.random.default_rng(11)
    X = np.vstack([rng.normal((0, 0), 0.3, (50, 2)), rng.normal((6, 6), 0.3, (50, 2)),
                   rng.uniform(-25, 30, (10, 2))])
    r = hdbscan(X, min_cluster_size=10)
    assert r.n_clusters == 2
    assert (r.labels[100:] == NOISE).sum() >= 8
    assert len(set(r.labels[:50])) == 1 and len(set(r.labels[50:100])) == 1
    assert np.all(r.membership_score[r.labels == NOISE] == 0)
    assert np.all(r.membership_score[r.labels != NOISE] > 0)
    assert np.all(r.membership_score <= 1)
    assert all(s >= 0 for s in r.stabilities.values())


def test_hdbscan_identical_points_single_cluster():
    r = hdbscan(np.ones((20, 3)), min_cluster_size=5)
    assert np.all(r.labels == 0)


def test_hdbscan_too_few_points():
    with pytest.raises(ValueError):
        hdbscan(np.zeros((4, 2)), min_cluster_size=5)


@pytest.mark.parametrize("seed", range(8))
def test_hdbscan_partition_matches_scikit_learn(seed):
    from sklearn.cluster import HDBSCAN
    rng = np.random.default_rng(seed)
    parts = [rng.normal(rng.uniform(-10, 10, 2), rng.uniform(0.2, 1.5), (int(rng.integers(15, 60)), 2))
             for _ in range(int(rng.integers(2, 5)))]
    X = np.vstack(parts + [rng.uniform(-15, 15, (10, 2))])
    mcs = int(rng.integers(5, 15))
    # min_samples=1 keeps mutual-reachability weights free of ties
    ours = hdbscan(X, mcs, min_samples=1).labels
    ref = HDBSCAN(min_cluster_size=mcs, min_samples=1).fit(X).labels_
    assert np.array_equal(ours == NOISE, ref == NOISE)
    assert len(set(zip(ours, ref))) == len(set(ours)) == len(set(ref))
