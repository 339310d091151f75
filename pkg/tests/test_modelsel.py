import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_blobs
from spikeclust.modelsel import (ElbowCurve, choose_k, distortion_sweep, kneedle, read_elbow_csv,
                                 with_choice, write_elbow_csv)


def two_slope(knee, ks=range(2, 15), steep=-10.0, flat=-0.1, top=100.0):
    ks = list(ks)
    y = [top + steep * (min(k, knee) - ks[0]) + flat * max(k - knee, 0) for k in ks]
    return ElbowCurve(ks, y)


@pytest.mark.parametrize("knee", [3, 4, 6])
def test_two_slope_curve_knee(knee):
    assert kneedle(two_slope(knee)) == knee


def test_straight_line_has_no_knee():
    assert kneedle(ElbowCurve(list(range(2, 15)), [50 - 3 * k for k in range(2, 15)])) is None
    assert kneedle(ElbowCurve([1, 2, 3], [5.0, 5.0, 5.0])) is None


@given(st.sampled_from([3, 4, 6]), st.floats(1e-3, 1e4), st.floats(-1e4, 1e4), st.integers(-1, 50))
def test_knee_invariant_to_affine_y_and_shifted_x(knee, a, b, shift):
    c = two_slope(knee)
    scaled = ElbowCurve([k + shift for k in c.ks], [a * d + b for d in c.distortions])
    assert kneedle(scaled) == knee + shift


def test_sharp_drop_then_flat_gives_four():
    # sharp drop from 2 to 4, nearly flat afterwards
    d = [1000, 520, 160, 150, 142, 135, 129, 124, 120, 117, 114, 112, 110]
    assert kneedle(ElbowCurve(list(range(2, 15)), d)) == 4


def test_planted_blobs_elbow():
    X, _ = make_blobs([(0, 0), (7, 0), (0, 7), (7, 7)], per=40, scale=0.6, seed=1)
    curve = distortion_sweep(X, 2, 12, n_init=5)
    assert kneedle(curve) == 4
    assert np.all(np.diff(curve.distortions) <= 1e-9 * curve.distortions[0])
    assert len(curve.runtimes_sec) == 11 and all(t > 0 for t in curve.runtimes_sec)


def test_sweep_including_k_equal_n():
    X = np.random.default_rng(0).normal(size=(6, 2))
    assert distortion_sweep(X, 1, 6).distortions[-1] == pytest.approx(0.0, abs=1e-12)
    for lo, hi in ((0, 3), (4, 3), (2, 7)):
        with pytest.raises(ValueError):
            distortion_sweep(X, lo, hi)


def test_choose_k():
    c = two_slope(4)
    assert choose_k(c, 5) == 5
    assert choose_k(c) == 4
    with pytest.raises(ValueError):
        choose_k(ElbowCurve([1, 2, 3], [3.0, 2.0, 1.0]))
    with pytest.raises(ValueError):
        kneedle(ElbowCurve([1, 2], [2.0, 1.0]))


def test_curve_validation_and_csv(tmp_path):
    with pytest.raises(ValueError):
        ElbowCurve([2, 2, 3], [1, 1, 1])
    c = with_choice(ElbowCurve([2, 3, 4], [9.0, 4.0, 3.5], [0.1, 0.2, 0.3]), 3)
    p = tmp_path / "e.csv"
    write_elbow_csv(c, p, {"seed": 1})
    lines = p.read_text().splitlines()
    assert lines[1] == "k,distortion,runtime_sec,chosen" and lines[3].endswith(",1")
    back = read_elbow_csv(p)
    assert back.ks == c.ks and back.distortions == c.distortions and back.chosen_k == 3
