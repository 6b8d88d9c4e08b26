import numpy as np
import pytest

from ibadmm.prob_core import JointXY, example_joint


@pytest.fixture(scope="session")
def joint():
    return example_joint()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_encoder(rng, nz, nx, eps=0.0):
    e = rng.exponential(size=(nz, nx))
    e /= e.sum(axis=0, keepdims=True)
    return eps + (1.0 - nz * eps) * e


def random_simplex(rng, n, eps=0.0):
    p = rng.exponential(size=n)
    p /= p.sum()
    return eps + (1.0 - n * eps) * p


def near_uniform_joint(rng, n=3, spread=0.04):
    """Uniform p(y|x) with a small multiplicative perturbation (ratios <= 1.1)."""
    t = np.full((n, n), 1.0 / n) * (1.0 + spread * rng.uniform(-1, 1, (n, n)))
    t /= t.sum(axis=0, keepdims=True)
    return JointXY(t, np.full(n, 1.0 / n))
