import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def make_blobs(centers, per=30, scale=0.3, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    X = np.vstack([rng.normal(c, scale, size=(per, centers.shape[1])) for c in centers])
    y = np.repeat(np.arange(len(centers)), per)
    return X, y


@pytest.fixture
def blobs():
    return make_blobs([(0, 0), (8, 0), (0, 8)], per=40, seed=3)


@pytest.fixture(autouse=True)
def _single_thread():
    from spikeclust import _parallel
    _parallel.set_num_threads(1)
    yield
    _parallel.set_num_threads(1)
