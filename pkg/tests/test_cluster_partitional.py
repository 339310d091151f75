import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_blobs
from spikeclust.cluster import fuzzy_cmeans, kmeans, kmodes
from spikeclust.cluster.fuzzy import memberships


def same_partition(a, b):
    pairs = set(zip(a.tolist(), b.tolist()))
    return len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))


def best_two_partition(cost_fn, n):
    """Exhaustive search over all splits of n points into two non-empty groups."""
    best, arg = np.inf, None
    for mask in itertools.product([0, 1], repeat=n - 1):
        lab = np.array((0,) + mask)
        if lab.min() == lab.max():
            continue
        c = cost_fn(lab)
        if c < best - 1e-12:
            best, arg = c, lab
    return best, arg


def sse(X, lab):
    return sum(((X[lab == g] - X[lab == g].mean(0)) ** 2).sum() for g in (0, 1))


# -- k-means -------------------------------------------------------------------

def test_kmeans_matches_exhaustive_two_partition():
    X, y = make_blobs([(0, 0), (5, 5)], per=5, scale=0.5, seed=2)
    best, arg = best_two_partition(lambda lab: sse(X, lab), len(X))
    r = kmeans(X, 2, seed=0)
    assert r.distortion == pytest.approx(best)
    assert same_partition(r.labels, arg) and same_partition(r.labels, y)


def test_kmeans_trivial_cases(blobs):
    X, _ = blobs
    one = kmeans(X, 1)
    assert np.allclose(one.centers[0], X.mean(0))
    assert one.distortion == pytest.approx(X.var(0).sum() * len(X))
    assert kmeans(X[:12], 12).distortion == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_kmeans_history_monotone_and_no_empty_cluster(seed):
    X, _ = make_blobs([(0, 0), (3, 0), (0, 3), (3, 3)], per=25, scale=1.0, seed=seed)
    r = kmeans(X, 6, seed=seed, n_init=3)
    h = np.array(r.history)
    assert np.all(np.diff(h) <= 1e-9 * h[0])
    assert np.bincount(r.labels, minlength=6).min() >= 1 and r.labels.max() < 6


def test_kmeans_row_permutation_invariance(blobs):
    X, _ = blobs
    perm = np.random.default_rng(0).permutation(len(X))
    a, b = kmeans(X, 3, seed=1), kmeans(X[perm], 3, seed=1)
    assert same_partition(a.labels[perm], b.labels)
    assert a.distortion == pytest.approx(b.distortion)


def test_kmeans_duplicates_fill_empty_clusters():
    X = np.vstack([np.zeros((6, 2)), np.ones((2, 2))])
    r = kmeans(X, 4, seed=0)
    assert np.bincount(r.labels, minlength=4).min() >= 1


def test_kmeans_errors():
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 4)
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 0)


# -- k-modes -------------------------------------------------------------------

def test_kmodes_two_row_groups():
    X = np.array([[1, 0, 0]] * 5 + [[0, 1, 1]] * 5)
    r = kmodes(X, 2, seed=0)
    assert same_partition(r.labels, np.repeat([0, 1], 5))
    assert {tuple(c) for c in r.centers} == {(1, 0, 0), (0, 1, 1)}
    assert r.distortion == 0


def test_kmodes_matches_exhaustive_matching_cost():
    rng = np.random.default_rng(4)
    X = rng.integers(0, 3, size=(9, 5))

    def cost(lab):
        total = 0
        for g in (0, 1):
            block = X[lab == g]
            for j in range(X.shape[1]):
                total += len(block) - np.bincount(block[:, j]).max()
        return total

    best, _ = best_two_partition(cost, len(X))
    assert kmodes(X, 2, n_init=30, seed=0).distortion == best


def test_kmodes_trivial_cases():
    X = np.array([[1, 2], [1, 3], [2, 3], [1, 3]])
    assert tuple(kmodes(X, 1).centers[0]) == (1, 3)
    same = np.tile([4, 0, 7], (6, 1))
    assert kmodes(same, 3).distortion == 0


@given(st.integers(0, 1000))
def test_kmodes_cost_history_monotone(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(40, 6))
    h = np.array(kmodes(X, 3, n_init=2, seed=seed).history)
    assert np.all(np.diff(h) <= 0)


# -- fuzzy c-means -------------------------------------------------------------

def test_fuzzy_two_symmetric_points():
    r = fuzzy_cmeans(np.array([[0.0, 0.0], [4.0, 0.0]]), 2, seed=0)
    U = r.membership[:, np.argsort(r.centers[:, 0])]
    assert np.allclose(U, np.eye(2), atol=1e-6)


def test_fuzzy_equidistant_point_splits_evenly():
    assert np.allclose(memberships(np.array([[2.0, 2.0]]), 2.0), [[0.5, 0.5]])


def test_fuzzy_coincident_point_gets_full_membership():
    U = memberships(np.array([[0.0, 3.0, 5.0]]), 2.0)
    assert np.array_equal(U, [[1.0, 0.0, 0.0]])


@pytest.mark.parametrize("m", [1.05, 1.5, 2.0, 3.0])
def test_fuzzy_rows_sum_to_one_and_objective_monotone(blobs, m):
    X, _ = blobs
    r = fuzzy_cmeans(X, 3, m=m, seed=2)
    assert np.abs(r.membership.sum(1) - 1).max() < 1e-9
    assert r.membership.min() >= 0 and r.membership.max() <= 1 and r.objective >= 0
    h = np.array(r.history)
    assert np.all(np.diff(h) <= 1e-9 * h[0])


def test_fuzzy_near_one_is_nearly_hard(blobs):
    X, _ = blobs
    r = fuzzy_cmeans(X, 3, m=1.05, seed=0)
    assert same_partition(r.labels, kmeans(X, 3).labels)
    assert r.membership.max(axis=1).min() > 0.99


def test_fuzzy_rejects_bad_m():
    with pytest.raises(ValueError):
        fuzzy_cmeans(np.zeros((4, 2)), 2, m=1.0)
