import numpy as np
import pytest

from spikeclust import _parallel
from spikeclust.randforest import ForestParams, rf_fit, rf_importances, rf_predict


def planted(n=200, noise=5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, noise + 1))
    y = (X[:, 2] > 0).astype(int)
    return X, y


def test_informative_feature_dominates_importance():
    X, y = planted()
    m = rf_fit(X, y, ForestParams(n_trees=30, seed=1))
    imp = rf_importances(m)
    assert imp.shape == (X.shape[1],)
    assert np.isclose(imp.sum(), 1.0)
    assert int(np.argmax(imp)) == 2 and imp[2] > 0.5


def test_fits_training_data_and_predicts_labels():
    X, y = planted()
    m = rf_fit(X, np.where(y == 1, "pos", "neg"), ForestParams(n_trees=20, seed=0))
    pred = rf_predict(m, X)
    assert set(pred) <= {"pos", "neg"}
    assert (pred == np.where(y == 1, "pos", "neg")).mean() > 0.95


def test_same_seed_same_forest_any_thread_count():
    X, y = planted(n=120)
    a = rf_importances(rf_fit(X, y, ForestParams(n_trees=15, seed=4)))
    _parallel.set_num_threads(4)
    b = rf_importances(rf_fit(X, y, ForestParams(n_trees=15, seed=4)))
    assert np.array_equal(a, b)


def test_pure_leaves_and_depth_limit():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    m = rf_fit(X, y, ForestParams(n_trees=5, max_depth=1, seed=0))
    assert all(t.n_leaves <= 2 for t in m.trees)


def test_errors():
    X = np.zeros((4, 2))
    with pytest.raises(ValueError):
        rf_fit(X, [1, 1, 1, 1])
    with pytest.raises(ValueError):
        rf_fit(np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        rf_fit(X, [0, 1, 0, 1], ForestParams(mtry=5))


def test_constant_features_give_zero_importance():
    X = np.zeros((10, 3))
    m = rf_fit(X, [0, 1] * 5, ForestParams(n_trees=3))
    assert np.array_equal(rf_importances(m), np.zeros(3))
