import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spikeclust.featsel import (apply_selector, boruta_run, lasso_fit, lasso_select, read_selector_json,
                                rff_fit, rff_transform, selector_record, soft_threshold, write_selector_json)
from spikeclust.featurize import FeatureMatrix
from spikeclust.randforest import ForestParams


def orthonormal_design(n, d, seed):
    """Columns with zero mean and unit population variance that are mutually
    orthogonal, so the standardized design is the design itself."""
    rng = np.random.default_rng(seed)
    A = np.column_stack([np.ones(n), rng.normal(size=(n, d))])
    Q, _ = np.linalg.qr(A)
    return np.sqrt(n) * Q[:, 1:]


# -- random Fourier features ---------------------------------------------------

def test_rff_shapes_and_parameters():
    m = rff_fit(10, D=64, gamma=0.5, seed=1)
    assert m.W.shape == (64, 10) and m.b.shape == (64,)
    assert np.all((m.b >= 0) & (m.b < 2 * np.pi))
    assert rff_fit(10, D=64, seed=1).gamma == pytest.approx(0.1)
    big = rff_fit(4, D=200_000, gamma=0.5, seed=0)
    assert big.W.var() == pytest.approx(1.0, rel=0.02)   # 2 * gamma


def test_rff_feature_matrix_in_and_out():
    fm = FeatureMatrix(np.ones((3, 5)), list("abcde"), ["r0", "r1", "r2"])
    z = rff_transform(rff_fit(5, D=8), fm)
    assert isinstance(z, FeatureMatrix) and z.shape == (3, 8) and z.row_ids == fm.row_ids
    with pytest.raises(ValueError):
        rff_transform(rff_fit(4, D=8), fm)


def test_rff_bad_parameters():
    for kw in ({"gamma": 0.0}, {"gamma": -1.0}, {"D": 0}):
        with pytest.raises(ValueError):
            rff_fit(3, **kw)


def test_rff_self_kernel_is_near_one():
    z = rff_transform(rff_fit(6, D=4096, gamma=0.3, seed=2), np.random.default_rng(0).normal(size=(20, 6)))
    assert np.abs((z * z).sum(axis=1) - 1.0).max() < 0.1


# -- Lasso -------------------------------------------------------------------

@given(st.integers(0, 10_000), st.floats(0.01, 1.5))
def test_lasso_matches_soft_threshold_on_orthonormal_design(seed, alpha):
    n, d = 64, 32
    X = orthonormal_design(n, d, seed)
    rng = np.random.default_rng(seed + 1)
    y = X @ rng.normal(0, 1, d) + rng.normal(0, 0.5, n) + 3.0
    m = lasso_fit(X, y, alpha=alpha, tol=1e-10)
    closed = soft_threshold(X.T @ (y - y.mean()) / n, alpha)
    assert np.abs(m.beta - closed).max() < 1e-6
    assert m.intercept == pytest.approx(y.mean())


def test_lasso_objective_never_increases_and_kkt_holds():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(80, 40))
    X[:, 1] = X[:, 0] + 1e-3 * rng.normal(size=80)
    y = X[:, 0] - 2 * X[:, 3] + rng.normal(0, 0.3, 80)
    m = lasso_fit(X, y, alpha=0.05, tol=1e-8)
    h = np.array(m.objective_history)
    assert m.converged and len(h) >= 2
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]))
    Xs = (X - X.mean(0)) / X.std(0)
    grad = Xs.T @ (y - y.mean() - Xs @ m.beta_std) / X.shape[0]
    active = m.beta_std != 0
    assert np.allclose(grad[active], 0.05 * np.sign(m.beta_std[active]), atol=1e-6)
    assert np.all(np.abs(grad[~active]) <= 0.05 + 1e-6)


def test_lasso_large_alpha_zeroes_everything():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 5))
    m = lasso_fit(X, rng.normal(size=30), alpha=100.0)
    assert not m.beta.any()


def test_lasso_constant_column_and_errors():
    X = np.column_stack([np.ones(20), np.arange(20.0)])
    m = lasso_fit(X, np.arange(20.0), alpha=0.01)
    assert m.beta[0] == 0.0 and m.beta[1] > 0.9
    with pytest.raises(ValueError):
        lasso_fit(X, np.arange(19.0))
    with pytest.raises(ValueError):
        lasso_fit(X, np.arange(20.0), alpha=-1)


def test_lasso_select_finds_class_markers():
    rng = np.random.default_rng(1)
    labels = np.repeat(["A", "B", "C"], 30)
    X = rng.normal(size=(90, 20))
    X[labels == "A", 4] += 4
    X[labels == "B", 11] += 4
    sel = lasso_select(X, labels, alpha=0.3)
    assert {4, 11} <= set(sel.selected)
    assert set(sel.per_class) == {"A", "B", "C"}
    with pytest.raises(ValueError):
        lasso_select(X, ["A"] * 90)


# -- Boruta ------------------------------------------------------------------

def test_boruta_sets_partition_features_and_hits_bounded():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 120)
    X = np.column_stack([y + rng.normal(0, 0.3, 120), rng.normal(size=(120, 6)), np.zeros(120)])
    res = boruta_run(X, y, n_iters=12, forest=ForestParams(n_trees=20), seed=3)
    d = X.shape[1]
    assert res.accepted | res.rejected | res.tentative == set(range(d))
    assert not (res.accepted & res.rejected)
    assert res.hits.max() <= 12 and res.hit_history.shape == (12, d)
    assert 0 in res.accepted and 7 in res.rejected
    again = boruta_run(X, y, n_iters=12, forest=ForestParams(n_trees=20), seed=3)
    assert again.accepted == res.accepted and np.array_equal(again.hits, res.hits)


def test_boruta_errors():
    X = np.random.default_rng(0).normal(size=(10, 2))
    with pytest.raises(ValueError):
        boruta_run(X, [0] * 10)
    with pytest.raises(ValueError):
        boruta_run(X, [0, 1] * 5, n_iters=3)


# -- stored selectors ----------------------------------------------------------

def test_selector_json_round_trip(tmp_path):
    fm = FeatureMatrix(np.arange(12.0).reshape(3, 4), ["w", "x", "y", "z"], ["a", "b", "c"], k=1)
    rec = selector_record("lasso", {"alpha": 0.1}, 0, fm, [3, 1])
    p = tmp_path / "s.json"
    write_selector_json(rec, p)
    out = apply_selector(read_selector_json(p), fm)
    assert out.column_ids == ("x", "z") and np.array_equal(out.values, fm.values[:, [1, 3]])
    rff = selector_record("rff", {"gamma": 0.2}, 5, projection_dims=6)
    z1, z2 = apply_selector(rff, fm), apply_selector(rff, fm)
    assert z1.shape == (3, 6) and np.array_equal(z1.values, z2.values)
    with pytest.raises(ValueError):
        apply_selector({"method": "lasso", "selected_column_ids": ["nope"]}, fm)
