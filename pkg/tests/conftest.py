import numpy as np
import pytest

from emperor.model import make_rng, validate_gmm


def random_gmm(rng, d, k, spread=2.0):
    w = rng.dirichlet(np.ones(k) * 2.0)
    mu = rng.normal(scale=spread, size=(k, d))
    covs = []
    for _ in range(k):
        A = rng.normal(size=(d, d))
        covs.append(A @ A.T / d + 0.3 * np.eye(d))
    return validate_gmm(w / w.sum(), mu, np.array(covs))


@pytest.fixture
def rng():
    return make_rng(12345)
