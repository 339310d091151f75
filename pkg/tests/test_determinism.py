"""Results must not depend on the worker-thread count."""
import numpy as np
import pytest

from conftest import make_blobs
from spikeclust import _parallel
from spikeclust.cluster import hdbscan, run_method
from spikeclust.embed import tsne
from spikeclust.featsel import boruta_run
from spikeclust.featurize import featurize_dataset
from spikeclust.randforest import ForestParams, rf_fit, rf_importances
from spikeclust.synth import default_specs, generate


def under_threads(fn):
    outs = []
    for t in (1, 4, 8):
        _parallel.set_num_threads(t)
        outs.append(fn())
    return outs


def test_chunking_ignores_thread_count():
    assert _parallel.chunk_bounds(600) == [(0, 256), (256, 512), (512, 600)]
    X = np.random.default_rng(0).normal(size=(700, 5))
    a, b, c = under_threads(lambda: _parallel.pairwise_sq_distances(X))
    assert np.array_equal(a, b) and np.array_equal(a, c)


def test_featurize_threads():
    recs, _ = generate(default_specs(per_variant=60))
    a, b, c = under_threads(lambda: featurize_dataset(recs).values)
    assert np.array_equal(a, b) and np.array_equal(a, c)


@pytest.mark.parametrize("method", ["kmeans", "kmodes", "fuzzy", "agglomerative"])
def test_clustering_threads(method):
    X, _ = make_blobs([(0, 0, 0), (5, 5, 0), (0, 5, 5)], per=200, scale=1.0, seed=2)
    if method == "kmodes":
        X = np.round(X).astype(int)
    outs = under_threads(lambda: run_method(method, X, 3, seed=1))
    for o in outs[1:]:
        assert np.array_equal(o.labels, outs[0].labels)
        if hasattr(o, "distortion"):
            assert o.distortion == outs[0].distortion


def test_hdbscan_forest_tsne_threads():
    X, y = make_blobs([(0, 0), (6, 6)], per=150, scale=0.8, seed=5)
    h = under_threads(lambda: hdbscan(X, 10).membership_score)
    assert all(np.array_equal(h[0], o) for o in h[1:])
    f = under_threads(lambda: rf_importances(rf_fit(X, y, ForestParams(n_trees=20, seed=3))))
    assert all(np.array_equal(f[0], o) for o in f[1:])
    e = under_threads(lambda: tsne(X[::3], iters=300, seed=1).coords)
    assert all(np.array_equal(e[0], o) for o in e[1:])


def test_boruta_threads():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 6))
    y = (X[:, 0] > 0).astype(int)
    outs = under_threads(lambda: boruta_run(X, y, n_iters=8, forest=ForestParams(n_trees=15), seed=2).hits)
    assert all(np.array_equal(outs[0], o) for o in outs[1:])
