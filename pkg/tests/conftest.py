"""
Shared fixtures and brute-force oracles for the test suite
"""

import itertools

import numpy as np
import pytest

from core.families import GaussianLocation
from core.measures import ParamDomain, make_measure
from estimation.optimizer import OptimizerOptions


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow Monte Carlo tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def gaussian():
    return GaussianLocation(sigma=1.0)


@pytest.fixture
def box():
    return ParamDomain((-5.0,), (5.0,))


@pytest.fixture
def two_component():
    """0.5 delta_{-1} + 0.5 delta_{1}"""
    return make_measure([-1.0, 1.0], [0.5, 0.5])


@pytest.fixture
def fast_opts():
    return OptimizerOptions(restarts=3, max_iterations=400, seed=7)


def random_measure(rng, k, q, spread=3.0):
    atoms = rng.uniform(-spread, spread, size=(k, q))
    weights = rng.dirichlet(np.ones(k))
    weights = np.maximum(weights, 1e-3)
    return make_measure(atoms, weights / weights.sum())


def vertex_coupling_cost(G, H, ell=1.0):
    """
    Optimal transport cost by enumerating every basic coupling

    A vertex of the transportation polytope is supported on at most
    k + k' - 1 cells; each candidate support is solved by least squares and
    kept when it satisfies the marginals with nonnegative mass
    """
    k, m = G.k, H.k
    cost = np.linalg.norm(G.atoms[:, None, :] - H.atoms[None, :, :], axis=-1) ** ell
    cells = list(itertools.product(range(k), range(m)))
    marginals = np.concatenate([G.weights, H.weights])
    best = np.inf
    for support in itertools.combinations(range(len(cells)), k + m - 1):
        A = np.zeros((k + m, len(support)))
        for col, idx in enumerate(support):
            i, j = cells[idx]
            A[i, col] = 1.0
            A[k + j, col] = 1.0
        mass, *_ = np.linalg.lstsq(A, marginals, rcond=None)
        if np.max(np.abs(A @ mass - marginals)) > 1e-10 or np.min(mass) < -1e-12:
            continue
        total = sum(mass[col] * cost[cells[idx]] for col, idx in enumerate(support))
        best = min(best, total)
    return best
