import numpy as np
import pytest

from srdgauss.closed_forms import counterexample_model
from srdgauss.model import scalar_model, validate_model
from srdgauss.solvers import srd_finite_horizon


@pytest.fixture(scope="session")
def unstable_model():
    return validate_model(np.diag([6.0, 1.0]), np.eye(2), np.eye(2))


@pytest.fixture(scope="session")
def iid_model():
    return validate_model(np.zeros((2, 2)), np.eye(2), np.eye(2))


@pytest.fixture(scope="session")
def cex_model():
    return counterexample_model(1.0)


@pytest.fixture(scope="session")
def unit_scalar():
    return scalar_model(1.0, 1.0)


@pytest.fixture(scope="session")
def unstable_finite(unstable_model):
    """Finite-horizon solves of the diag(6, 1) source at D=1, keyed by n."""
    cache = {}

    def get(n):
        if n not in cache:
            cache[n] = srd_finite_horizon(unstable_model, 1.0, n)
        return cache[n]
    return get


def split_search(a, D, step=1e-5):
    """Brute-force rate of diag(a, 0) with unit noise: best split D1 + D2 = D."""
    d1 = np.arange(step, D, step)
    d2 = D - d1
    r1 = np.maximum(0.0, 0.5 * np.log(a * a + 1.0 / d1))
    r2 = np.maximum(0.0, 0.5 * np.log(1.0 / d2))
    k = np.argmin(r1 + r2)
    return float((r1 + r2)[k]), float(d1[k])
