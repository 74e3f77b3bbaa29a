"""
Order Selection - estimate the number of components from fitted objectives
The selected order is the smallest l whose fitted Phi-distance falls below
the threshold a_n = c1 sqrt(ln n / n)
"""

import logging
from dataclasses import dataclass
from numbers import Real

import numpy as np

from core.errors import EmptyFitList, InvalidThreshold, KTooSmall, NTooSmall
from core.measures import make_measure
from estimation.objectives import MMD, KS, PopulationObjective, population_grid
from estimation.optimizer import OptimizerOptions, fit_all_orders, multistart, random_start
import config

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OrderResult:
    """
    Selected order

    determined is False when no fitted objective falls below the threshold;
    k_hat then holds the k_max fallback
    """
    k_hat: int
    determined: bool
    threshold: float
    objectives: tuple
    plug_in: object = None


def default_threshold(phi, n, c1=None):
    """
    a_n = c1 * sqrt(ln n / n)

    Args:
        phi: KS, MMD or Moments
        n: sample size (>= 2)
        c1: optional constant; by default sqrt(3)/2 for KS, 2 ||ker||_inf
            for MMD and 1 for Moments

    Returns:
        float threshold
    """
    if n < 2:
        raise NTooSmall(f"n must be >= 2, got {n}")
    if c1 is None:
        c1 = config.DEFAULT_C1[phi.name]
        if isinstance(phi, MMD):
            c1 *= phi.rkhs.sup_norm
    elif not c1 > 0:
        raise InvalidThreshold(f"c1 must be > 0, got {c1}")
    return float(c1 * np.sqrt(np.log(n) / n))


def estimate_order(fits, a_n):
    """
    Smallest l (1-based) with objective[l] <= a_n

    fits may hold FitResult objects or bare objective values. Without a
    crossing the result is undetermined with k_hat = len(fits)
    """
    if len(fits) == 0:
        raise EmptyFitList("no fits to select from")
    objectives = tuple(float(f) if isinstance(f, Real) else float(f.objective) for f in fits)
    for ell, value in enumerate(objectives, start=1):
        if value <= a_n:
            return OrderResult(ell, True, float(a_n), objectives)
    return OrderResult(len(objectives), False, float(a_n), objectives)


def plug_in(fam, phi, data, k_max, domain, opts=None, c1=None):
    """
    Fit every order up to k_max, select k_hat and return its fit

    Returns:
        OrderResult with plug_in set to the FitResult at k_hat (k_max when undetermined)
    """
    fits = fit_all_orders(fam, phi, data, k_max, domain, opts)
    n = np.asarray(data).shape[0]
    a_n = default_threshold(phi, n, c1)
    selected = estimate_order(fits, a_n)
    if not selected.determined:
        logger.warning(f"No order up to k_max={k_max} reaches a_n={a_n:.6g}; using k_max")
    else:
        logger.info(f"Selected k={selected.k_hat} at a_n={a_n:.6g}")
    return OrderResult(selected.k_hat, selected.determined, selected.threshold,
                       selected.objectives, fits[selected.k_hat - 1])


def _merge_closest_pair(G, domain):
    """G with its two closest atoms replaced by their weighted mean"""
    atoms, weights = G.atoms, G.weights
    gaps = np.linalg.norm(atoms[:, None, :] - atoms[None, :, :], axis=-1)
    gaps[np.diag_indices(G.k)] = np.inf
    i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
    merged_weight = weights[i] + weights[j]
    merged = (weights[i] * atoms[i] + weights[j] * atoms[j]) / merged_weight
    keep = [m for m in range(G.k) if m not in (i, j)]
    return make_measure(np.vstack([atoms[keep], merged]), np.append(weights[keep], merged_weight), domain)


def separation_gap(fam, phi, G, domain, opts=None, grid=None):
    """
    Numerical b_G: smallest population Phi-distance from G to a measure
    with k-1 atoms in domain

    Starts from G with its closest pair merged plus random starts; KS uses
    population_grid(fam, domain) unless a grid is given

    Returns:
        float >= 0 (an upper estimate, as good as the inner search)
    """
    opts = opts or OptimizerOptions()
    if G.k < 2:
        raise KTooSmall(f"the separation gap needs k >= 2 atoms, got {G.k}")
    if isinstance(phi, KS) and grid is None:
        grid = population_grid(fam, domain)
    objective = PopulationObjective(phi, fam, G, grid)

    k = G.k - 1
    candidates = [_merge_closest_pair(G, domain)]
    candidates += [random_start(domain, k, opts.seed, idx) for idx in range(1, opts.restarts)]
    return max(multistart(objective, k, domain, opts, candidates).objective, 0.0)


def lemma_event(process_term, a_n, b_G):
    """process_term <= min(a_n, b_G - a_n): under this event the selector returns the true order"""
    return bool(process_term <= min(a_n, b_G - a_n))
