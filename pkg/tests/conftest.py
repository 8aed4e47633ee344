import numpy as np
import pytest

from rfs.dataset import load_german_credit


def make_instance(seed=7, n=40, m_feat=3, noise=2.0, group_bias=True):
    """Fixed non-separable synthetic instance with all four (s, y) cells
    populated; the reduction-identity suite runs on these."""
    rng = np.random.default_rng(seed)
    X = np.hstack([rng.normal(size=(n, m_feat)), np.ones((n, 1))])
    w_true = np.array([1.0, -0.5, 0.2, -0.3])[: m_feat + 1]
    logits = X @ w_true + rng.normal(0.0, noise, n)
    y = (logits > 0).astype(int)
    if group_bias:
        # protected rows lean toward default, mirroring the credit setting
        s = ((logits + rng.normal(0.0, noise, n)) > 0.3).astype(int)
    else:
        s = (rng.random(n) < 0.4).astype(int)
    assert all(((s == a) & (y == b)).any() for a in (0, 1) for b in (0, 1))
    return X, y, s


@pytest.fixture(scope="session")
def fixed_instance():
    return make_instance()


@pytest.fixture(scope="session")
def gc_raw():
    return load_german_credit()
