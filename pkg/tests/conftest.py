import numpy as np
import pytest

from offgrid.data import pairwise_sq_distances
from offgrid.kernel import rbf_kernel
from offgrid.kkm import kkm_run, random_partition


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def blobs(n, d, k, seed, spread=1.0, sep=4.0):
    """Isotropic Gaussian clusters with centers ``sep`` apart along each axis."""
    r = np.random.default_rng(seed)
    centers = r.normal(0, sep, size=(k, d))
    labels = np.arange(n) % k
    return centers[labels] + r.normal(0, spread, size=(n, d)), labels


def converged_instance(n, d, k, seed, quantile=5.0):
    """Distances, kernel and a converged partition at a small percentile bandwidth."""
    from offgrid.data import percentile_sq_distance

    X, _ = blobs(n, d, k, seed)
    D = pairwise_sq_distances(X)
    sigma = percentile_sq_distance(D, quantile)
    K = rbf_kernel(D, sigma)
    run = kkm_run(K, random_partition(n, k, seed))
    assert run.converged
    return D, K, run.partition


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
