"""
Tests for the multistart Nelder-Mead estimator
"""

import numpy as np
import pytest

from core.errors import (
    ConfigError,
    DimensionMismatch,
    IncompatiblePhiFamily,
    KTooSmall,
    NonFiniteObjectiveAtInit,
)
from core.families import GaussianLocation, Poisson, sample_mixture
from core.measures import ParamDomain, make_measure, point_mass, wasserstein
from estimation.objectives import KS, MMD, GaussianRBF, Moments, PhiObjective, ks_objective, phi_distance
from estimation.optimizer import (
    OptimizerOptions,
    decode,
    encode,
    fit,
    fit_all_orders,
    initializations,
    local_search,
    nelder_mead,
    random_start,
    split_heaviest,
)


@pytest.fixture
def bimodal_data(gaussian):
    return sample_mixture(gaussian, make_measure([-2.0, 2.0], [0.5, 0.5]), 1000, seed=31)


# -----------------------------------------------------------------------------
# Options and reparameterization
# -----------------------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"restarts": 0},
    {"max_iterations": -1},
    {"threads": 0},
    {"objective_tolerance": 0.0},
])
def test_options_validation(kwargs):
    with pytest.raises(ConfigError):
        OptimizerOptions(**kwargs)


def test_encode_decode_recovers_the_measure(box):
    G = make_measure([-1.5, 3.0], [0.3, 0.7])
    H = decode(encode(G, box), 2, box)
    np.testing.assert_allclose(H.atoms, G.atoms, atol=1e-8)
    np.testing.assert_allclose(H.weights, G.weights, atol=1e-8)


def test_decode_always_lands_in_the_box(box):
    rng = np.random.default_rng(0)
    for _ in range(50):
        G = decode(rng.normal(scale=20.0, size=5), 3, box)
        assert np.all(G.atoms >= -5.0) and np.all(G.atoms <= 5.0)
        assert G.weights.sum() == pytest.approx(1.0)


def test_encode_pads_small_starts(box):
    assert encode(point_mass(0.5), box, k=3).shape == (3 + 2,)


# -----------------------------------------------------------------------------
# Starts
# -----------------------------------------------------------------------------

def test_initializations_quantile_start(gaussian, box):
    data = np.arange(1.0, 101.0) / 25.0
    starts = initializations(gaussian, data, 2, box, 4, seed=5)
    assert len(starts) == 4
    np.testing.assert_allclose(starts[0].atoms[:, 0], np.quantile(data, [0.25, 0.75]))
    np.testing.assert_allclose(starts[0].weights, [0.5, 0.5])
    for start in starts[1:]:
        assert start.k == 2
        assert np.all(np.abs(start.atoms) <= 5.0)


def test_initializations_are_reproducible(gaussian, box):
    data = np.linspace(-1, 1, 20)
    first = initializations(gaussian, data, 3, box, 5, seed=11)
    second = initializations(gaussian, data, 3, box, 5, seed=11)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.atoms, b.atoms)
        np.testing.assert_array_equal(a.weights, b.weights)
    with pytest.raises(ConfigError):
        initializations(gaussian, data, 3, box, 0, seed=11)


def test_random_starts_differ_by_index(box):
    assert not np.array_equal(random_start(box, 2, 3, 1).atoms, random_start(box, 2, 3, 2).atoms)


def test_split_heaviest(box):
    G = make_measure([-1.0, 2.0], [0.3, 0.7])
    H = split_heaviest(G, box)
    assert H.k == 3
    assert sorted(H.weights) == pytest.approx([0.3, 0.35, 0.35])


# -----------------------------------------------------------------------------
# Local search
# -----------------------------------------------------------------------------

def test_local_search_descends(gaussian, box, bimodal_data, fast_opts):
    cache = PhiObjective(KS(), gaussian, bimodal_data)
    init = make_measure([-0.5, 0.5], [0.5, 0.5])
    result = local_search(cache, init, box, fast_opts)
    assert result.objective <= cache(init)
    assert result.evaluations > 1
    assert all(b <= a for a, b in zip(result.history, result.history[1:]))
    assert result.history[-1] == pytest.approx(result.objective)


def test_local_search_rejects_a_bad_start(box, fast_opts):
    with pytest.raises(NonFiniteObjectiveAtInit):
        local_search(lambda G: np.inf, point_mass(0.0), box, fast_opts)


def test_nelder_mead_stops_on_either_tolerance():
    simplex = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    opts = OptimizerOptions(max_iterations=2000)
    # Flat objective: the spread is zero before any move
    assert nelder_mead(lambda x: 1.0, simplex, opts) == (True, 0)
    # Steep kink: the spread stays large, the simplex still collapses
    converged, iterations = nelder_mead(lambda x: 1e12 * float(np.abs(x - 0.3).sum()), simplex, opts)
    assert converged
    assert iterations < opts.max_iterations
    assert nelder_mead(lambda x: float(np.sum(x ** 2)), simplex, OptimizerOptions(max_iterations=3)) == (False, 3)


def test_nelder_mead_reports_the_best_vertex():
    seen = []
    nelder_mead(lambda x: float(np.sum((x - 1.0) ** 2)), [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]],
                OptimizerOptions(max_iterations=300), callback=seen.append)
    np.testing.assert_allclose(seen[-1], [1.0, 1.0], atol=1e-4)


def test_zero_iterations_returns_the_start(gaussian, box, bimodal_data):
    opts = OptimizerOptions(restarts=1, max_iterations=0)
    cache = PhiObjective(KS(), gaussian, bimodal_data)
    init = make_measure([-1.0, 1.0], [0.5, 0.5])
    result = local_search(cache, init, box, opts)
    assert result.measure is init
    assert result.objective == cache(init)
    assert not result.converged


# -----------------------------------------------------------------------------
# Fits
# -----------------------------------------------------------------------------

def test_single_atom_ks_fit(gaussian, box, fast_opts):
    data = sample_mixture(gaussian, point_mass(0.0), 2000, seed=3)
    result = fit(gaussian, KS(), data, 1, box, fast_opts)
    assert abs(result.measure.atoms[0, 0]) <= 0.15

    # The search is at least as good as a fine grid, up to the grid spacing
    cache = PhiObjective(KS(), gaussian, data)
    grid_best = min(cache(point_mass(t)) for t in np.linspace(-0.5, 0.5, 1001))
    assert result.objective <= grid_best + 2e-3


def test_fit_is_deterministic_and_thread_independent(gaussian, box, bimodal_data):
    serial = OptimizerOptions(restarts=4, max_iterations=300, seed=9, threads=1)
    parallel = OptimizerOptions(restarts=4, max_iterations=300, seed=9, threads=4)
    first = fit(gaussian, KS(), bimodal_data, 2, box, serial)
    again = fit(gaussian, KS(), bimodal_data, 2, box, serial)
    threaded = fit(gaussian, KS(), bimodal_data, 2, box, parallel)
    for other in (again, threaded):
        np.testing.assert_array_equal(first.measure.atoms, other.measure.atoms)
        np.testing.assert_array_equal(first.measure.weights, other.measure.weights)
        assert first.objective == other.objective
        assert first.start_index == other.start_index


def test_injected_truth_dominates(gaussian, box, bimodal_data, fast_opts):
    truth = make_measure([-2.0, 2.0], [0.5, 0.5])
    for phi in (KS(), MMD(GaussianRBF(0.5))):
        result = fit(gaussian, phi, bimodal_data, 2, box, fast_opts, starts=[truth])
        assert result.objective <= phi_distance(phi, gaussian, truth, bimodal_data) + 1e-12


def test_fit_reports_the_phi_distance(gaussian, box, bimodal_data, fast_opts):
    phi = MMD(GaussianRBF(0.5))
    result = fit(gaussian, phi, bimodal_data, 2, box, fast_opts)
    assert result.objective == pytest.approx(phi_distance(phi, gaussian, result.measure, bimodal_data))
    assert result.objective >= 0.0


def test_fit_recovers_separated_components(gaussian, box, bimodal_data, fast_opts):
    result = fit(gaussian, MMD(GaussianRBF(0.5)), bimodal_data, 2, box, fast_opts)
    np.testing.assert_allclose(np.sort(result.measure.atoms[:, 0]), [-2.0, 2.0], atol=0.3)


def test_fit_all_orders_is_monotone(gaussian, box, bimodal_data, fast_opts):
    results = fit_all_orders(gaussian, KS(), bimodal_data, 3, box, fast_opts)
    objectives = [r.objective for r in results]
    assert all(b <= a + 1e-12 for a, b in zip(objectives, objectives[1:]))
    assert objectives[1] / objectives[0] < 0.5
    for ell, result in enumerate(results, start=1):
        assert result.measure.k <= ell
        assert np.all(np.abs(result.measure.atoms) <= 5.0)


def test_fit_all_orders_first_entry_equals_fit(gaussian, box, bimodal_data, fast_opts):
    single = fit(gaussian, KS(), bimodal_data, 1, box, fast_opts)
    (first,) = fit_all_orders(gaussian, KS(), bimodal_data, 1, box, fast_opts)
    np.testing.assert_array_equal(single.measure.atoms, first.measure.atoms)
    assert single.objective == first.objective


def test_moment_fit(gaussian, box, fast_opts):
    truth = make_measure([-1.5, 1.5], [0.5, 0.5])
    data = sample_mixture(gaussian, truth, 20000, seed=4)
    result = fit(gaussian, Moments(3, 0.0), data, 2, box, fast_opts)
    np.testing.assert_allclose(np.sort(result.measure.atoms[:, 0]), [-1.5, 1.5], atol=0.3)


def test_discrete_fit_stays_in_the_mean_domain(fast_opts):
    fam = Poisson()
    domain = ParamDomain((0.0,), (20.0,))
    data = sample_mixture(fam, make_measure([2.0, 9.0], [0.5, 0.5]), 800, seed=6)
    result = fit(fam, KS(), data, 2, domain, fast_opts)
    assert np.all(result.measure.atoms > 0.0)
    assert result.objective == pytest.approx(ks_objective(fam, result.measure, data))


def test_fit_input_errors(gaussian, box, fast_opts):
    data = np.zeros(10)
    with pytest.raises(KTooSmall):
        fit(gaussian, KS(), data, 0, box, fast_opts)
    with pytest.raises(DimensionMismatch):
        fit(gaussian, KS(), data, 1, ParamDomain((-1.0, -1.0), (1.0, 1.0)), fast_opts)
    with pytest.raises(IncompatiblePhiFamily):
        fit(gaussian, Moments(2, 0.0), data, 2, box, fast_opts)
    with pytest.raises(ConfigError):
        fit(gaussian, KS(), data, 1, box, fast_opts, use_default_starts=False)


def test_two_dimensional_fit(fast_opts):
    fam = GaussianLocation(d=2)
    domain = ParamDomain((-4.0, -4.0), (4.0, 4.0))
    data = sample_mixture(fam, point_mass([1.0, -1.0]), 400, seed=2)
    result = fit(fam, MMD(GaussianRBF(0.5)), data, 1, domain, fast_opts)
    np.testing.assert_allclose(result.measure.atoms[0], [1.0, -1.0], atol=0.3)


@pytest.mark.slow
@pytest.mark.parametrize("phi", [KS(), MMD(GaussianRBF(1.0)), Moments(3, 0.0)], ids=lambda p: p.name)
def test_estimates_improve_with_more_data(gaussian, box, two_component, phi):
    opts = OptimizerOptions(restarts=4, max_iterations=1000, seed=3)
    improved = 0
    for s in range(20):
        small = sample_mixture(gaussian, two_component, 250, seed=2 * s)
        large = sample_mixture(gaussian, two_component, 16000, seed=2 * s + 1)
        error_small = wasserstein(fit(gaussian, phi, small, 2, box, opts).measure, two_component)
        error_large = wasserstein(fit(gaussian, phi, large, 2, box, opts).measure, two_component)
        improved += error_large < error_small
    assert improved >= 18
