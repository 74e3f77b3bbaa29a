"""
Optimizer - multistart Nelder-Mead search over k-atom mixing measures
Atoms live in the parameter box through a coordinatewise logit map and
weights on the simplex through a softmax with the last logit pinned to 0
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from core.errors import (
    ConfigError,
    DimensionMismatch,
    IncompatiblePhiFamily,
    KTooSmall,
    MixfitError,
    NonFiniteObjectiveAtInit,
)
from core.families import as_data
from core.measures import make_measure
from core.random_streams import make_stream, mix_seed
from estimation.objectives import Moments, PhiObjective
import config

logger = logging.getLogger(__name__)

# Keeps logit finite at the box faces
_UNIT_CLIP = 1e-12


@dataclass(frozen=True)
class OptimizerOptions:
    restarts: int = config.RESTARTS
    max_iterations: int = config.MAX_ITERATIONS
    objective_tolerance: float = config.OBJECTIVE_TOL
    simplex_tolerance: float = config.SIMPLEX_TOL
    seed: int = config.DEFAULT_SEED
    threads: int = 1

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iterations < 0:
            raise ConfigError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if not (self.objective_tolerance > 0 and self.simplex_tolerance > 0):
            raise ConfigError("tolerances must be > 0")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")


@dataclass(frozen=True)
class FitResult:
    """
    Outcome of a fit

    objective is the Phi-distance at measure; history holds the best
    surrogate value after each Nelder-Mead iteration of the winning start
    """
    measure: object
    objective: float
    evaluations: int
    converged: bool
    start_index: int
    history: tuple = field(default=(), repr=False)


# ---------------------------------------------------------------------------
# Reparameterization
# ---------------------------------------------------------------------------

def _pad_atoms(atoms, weights, k):
    """Split the heaviest atom in place (zero offset) until there are k atoms"""
    atoms = [np.asarray(a, dtype=float) for a in atoms]
    weights = list(weights)
    if len(atoms) > k:
        raise DimensionMismatch(f"start has {len(atoms)} atoms, the fit allows {k}")
    while len(atoms) < k:
        heaviest = int(np.argmax(weights))
        weights[heaviest] /= 2.0
        atoms.append(atoms[heaviest].copy())
        weights.append(weights[heaviest])
    return np.array(atoms), np.array(weights)


def encode(G, domain, k=None):
    """
    Measure -> unconstrained vector (k*q atom logits, then k-1 weight logits)
    """
    k = k or G.k
    atoms, weights = _pad_atoms(G.atoms, G.weights, k)
    lower = np.asarray(domain.lower)
    unit = np.clip((atoms - lower) / domain.width, _UNIT_CLIP, 1.0 - _UNIT_CLIP)
    weight_logits = np.log(weights[:-1]) - np.log(weights[-1])
    return np.concatenate([logit(unit).reshape(-1), weight_logits])


def decode(x, k, domain):
    """Unconstrained vector -> MixingMeasure inside domain"""
    q = domain.q
    lower = np.asarray(domain.lower)
    atoms = lower + domain.width * expit(x[:k * q].reshape(k, q))
    atoms = np.clip(atoms, lower, np.asarray(domain.upper))

    # Softmax with the last logit fixed at 0
    logits = np.concatenate([x[k * q:], [0.0]])
    weights = np.exp(logits - logits.max())
    weights = np.maximum(weights / weights.sum(), config.WEIGHT_FLOOR)
    weights = weights / weights.sum()
    return make_measure(atoms, weights, domain)


def _initial_simplex(x0):
    """x0 plus one vertex per coordinate, stepped SIMPLEX_EDGE of the coordinate's scale"""
    steps = config.SIMPLEX_EDGE * np.maximum(1.0, np.abs(x0))
    return np.vstack([x0, x0 + np.diag(steps)])


# ---------------------------------------------------------------------------
# Local search
# ---------------------------------------------------------------------------

class _Tracker:
    """Counts evaluations and remembers the best point seen"""

    def __init__(self, objective, k, domain):
        self.objective = objective
        self.k = k
        self.domain = domain
        self.evaluations = 0
        self.best_x = None
        self.best_value = np.inf
        self.history = []

    def __call__(self, x):
        self.evaluations += 1
        try:
            value = float(self.objective(decode(x, self.k, self.domain)))
        except MixfitError:
            return np.inf
        if not np.isfinite(value):
            return np.inf
        if value < self.best_value:
            self.best_value = value
            self.best_x = np.array(x, copy=True)
        return value

    def record(self, _xk):
        self.history.append(self.best_value)


# Reflection, expansion, contraction and shrink coefficients
REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5


def _simplex_settled(sim, fsim, opts):
    """Objective spread or simplex diameter (sup-norm, around the best vertex) within tolerance"""
    spread = np.max(np.abs(fsim[1:] - fsim[0]))
    diameter = np.max(np.abs(sim[1:] - sim[0]))
    return bool(spread <= opts.objective_tolerance or diameter <= opts.simplex_tolerance)


def nelder_mead(func, simplex, opts, callback=None):
    """
    Nelder-Mead from an explicit initial simplex

    Stops as soon as either tolerance of opts is met, or after
    opts.max_iterations iterations. callback receives the best vertex after
    every iteration

    Returns:
        (converged, iterations)
    """
    sim = np.array(simplex, dtype=float)
    fsim = np.array([func(x) for x in sim], dtype=float)
    order = np.argsort(fsim, kind='stable')
    sim, fsim = sim[order], fsim[order]

    for iteration in range(opts.max_iterations):
        if _simplex_settled(sim, fsim, opts):
            return True, iteration

        xbar = sim[:-1].mean(axis=0)
        xr = (1 + REFLECT) * xbar - REFLECT * sim[-1]
        fr = func(xr)
        if fr < fsim[0]:
            xe = (1 + REFLECT * EXPAND) * xbar - REFLECT * EXPAND * sim[-1]
            fe = func(xe)
            sim[-1], fsim[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
        else:
            if fr < fsim[-1]:
                # Outside contraction
                xc = (1 + CONTRACT * REFLECT) * xbar - CONTRACT * REFLECT * sim[-1]
                fc = func(xc)
                accepted = fc <= fr
            else:
                xc = (1 - CONTRACT) * xbar + CONTRACT * sim[-1]
                fc = func(xc)
                accepted = fc < fsim[-1]
            if accepted:
                sim[-1], fsim[-1] = xc, fc
            else:
                sim[1:] = sim[0] + SHRINK * (sim[1:] - sim[0])
                fsim[1:] = [func(x) for x in sim[1:]]

        order = np.argsort(fsim, kind='stable')
        sim, fsim = sim[order], fsim[order]
        if callback is not None:
            callback(sim[0])

    return _simplex_settled(sim, fsim, opts), opts.max_iterations


def local_search(objective, init, domain, opts, k=None):
    """
    Nelder-Mead from one start over the reparameterized measure

    Args:
        objective: callable MixingMeasure -> float
        init: starting MixingMeasure (padded to k atoms if it has fewer)
        domain: ParamDomain
        opts: OptimizerOptions
        k: number of atoms searched over (default init.k)

    Returns:
        FitResult whose objective is the value of `objective` at the result

    Raises:
        NonFiniteObjectiveAtInit: objective is infinite or undefined at init
    """
    k = k or init.k
    try:
        init_value = float(objective(init))
    except MixfitError as exc:
        raise NonFiniteObjectiveAtInit(str(exc)) from exc
    if not np.isfinite(init_value):
        raise NonFiniteObjectiveAtInit(f"objective is {init_value} at {init!r}")

    if opts.max_iterations == 0:
        return FitResult(init, init_value, 1, False, 0, (init_value,))

    x0 = encode(init, domain, k)
    tracker = _Tracker(objective, k, domain)
    converged, _ = nelder_mead(tracker, _initial_simplex(x0), opts, callback=tracker.record)

    # Never return something worse than the start itself
    if tracker.best_x is None or tracker.best_value >= init_value:
        measure, value = init, init_value
    else:
        measure, value = decode(tracker.best_x, k, domain), tracker.best_value
    history = tuple(min(h, init_value) for h in tracker.history) or (value,)
    return FitResult(measure, value, tracker.evaluations + 1, converged, 0, history)


# ---------------------------------------------------------------------------
# Starts
# ---------------------------------------------------------------------------

def _flat_simplex_weights(rng, k):
    weights = np.maximum(rng.dirichlet(np.ones(k)), config.WEIGHT_FLOOR)
    return weights / weights.sum()


def random_start(domain, k, seed, index):
    """Uniform atoms in the box and flat Dirichlet weights from the stream mix_seed(seed, k, index)"""
    rng = make_stream(mix_seed(seed, k, index))
    atoms = np.asarray(domain.lower) + domain.width * rng.uniform(size=(k, domain.q))
    return make_measure(atoms, _flat_simplex_weights(rng, k), domain)


def initializations(fam, data, k, domain, count, seed):
    """
    Deterministic starting measures for a k-atom fit

    The first start puts atoms at the evenly spaced data quantiles
    (i + 0.5)/k with uniform weights; start i > 0 draws atoms uniformly in
    the box and weights from a flat Dirichlet, using its own stream
    mix_seed(seed, k, i)
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    data = as_data(fam, data)

    levels = (np.arange(k) + 0.5) / k
    quantiles = np.quantile(data, levels, axis=0).reshape(k, -1)
    atoms = domain.clamp(quantiles, margin=config.BOUNDARY_MARGIN)
    starts = [make_measure(atoms, np.full(k, 1.0 / k), domain)]

    starts.extend(random_start(domain, k, seed, idx) for idx in range(1, count))
    return starts


def split_heaviest(G, domain):
    """Split the heaviest atom into two at +/- SPLIT_OFFSET of the box width, halving its weight"""
    i = G.heaviest_atom()
    offset = config.SPLIT_OFFSET * domain.width
    atoms = [a for j, a in enumerate(G.atoms) if j != i]
    weights = [w for j, w in enumerate(G.weights) if j != i]
    for sign in (-1.0, 1.0):
        atoms.append(domain.clamp(G.atoms[i] + sign * offset))
        weights.append(G.weights[i] / 2.0)
    return make_measure(atoms, weights, domain)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _check_fit_inputs(fam, phi, k, domain):
    if k < 1:
        raise KTooSmall(f"k must be >= 1, got {k}")
    if domain.q != fam.dim:
        raise DimensionMismatch(f"domain has q={domain.q}, {fam.spec()} needs q={fam.dim}")
    if isinstance(phi, Moments):
        if phi.order < 2 * k - 1:
            raise IncompatiblePhiFamily(f"a {k}-atom moment fit needs order >= {2 * k - 1}, got {phi.order}")
        if phi.order > 2 * k - 1:
            logger.warning(f"Moment order {phi.order} exceeds 2k-1 = {2 * k - 1}")


def multistart(cache, k, domain, opts, candidates):
    """
    Local search from every candidate and a stable min over start index

    cache is any objective exposing __call__ (the search surrogate),
    distance() (the reported value) and phi
    """
    def run(indexed):
        idx, start = indexed
        try:
            outcome = local_search(cache, start, domain, opts, k=k)
        except NonFiniteObjectiveAtInit as exc:
            logger.warning(f"Skipping start {idx}: {exc}")
            return None
        logger.debug(f"start {idx}: objective={outcome.objective:.6g} converged={outcome.converged}")
        return outcome

    # executor.map keeps start order, so the reduction below is thread-count independent
    if opts.threads > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as executor:
            outcomes = list(executor.map(run, enumerate(candidates)))
    else:
        outcomes = [run(item) for item in enumerate(candidates)]

    usable = [i for i, o in enumerate(outcomes) if o is not None]
    if not usable:
        raise NonFiniteObjectiveAtInit(f"the objective is undefined at every start for k={k}")
    best = min(usable, key=lambda i: (outcomes[i].objective, i))
    winner = outcomes[best]
    outcomes = [outcomes[i] for i in usable]
    if not any(o.converged for o in outcomes) and opts.max_iterations > 0:
        logger.warning(f"No start converged for k={k} ({len(outcomes)} starts)")
    logger.info(f"Fit k={k} {cache.phi.spec()}: best start {best} of {len(outcomes)}")

    return FitResult(
        measure=winner.measure,
        objective=cache.distance(winner.measure),
        evaluations=sum(o.evaluations for o in outcomes),
        converged=winner.converged,
        start_index=best,
        history=winner.history,
    )


def _candidates(cache, k, domain, opts, starts, use_default_starts):
    candidates = initializations(cache.fam, cache.data, k, domain, opts.restarts, opts.seed) \
        if use_default_starts else []
    candidates += [make_measure(s.atoms, s.weights, domain) for s in starts]
    if not candidates:
        raise ConfigError("no starting measures")
    return candidates


def fit(fam, phi, data, k, domain, opts=None, starts=(), use_default_starts=True):
    """
    Minimum Phi-distance estimate over measures with at most k atoms in domain

    Args:
        fam: KernelFamily
        phi: KS, MMD or Moments
        data: observations
        k: number of atoms
        domain: ParamDomain
        opts: OptimizerOptions (defaults from config)
        starts: extra starting measures, tried after the default ones
        use_default_starts: include initializations(...)

    Returns:
        FitResult of the best start; ties go to the lowest start index
    """
    opts = opts or OptimizerOptions()
    _check_fit_inputs(fam, phi, k, domain)
    cache = PhiObjective(phi, fam, data)
    return multistart(cache, k, domain, opts, _candidates(cache, k, domain, opts, starts, use_default_starts))


def fit_all_orders(fam, phi, data, k_max, domain, opts=None):
    """
    Fits with l = 1..k_max atoms, objectives nonincreasing in l

    Each l > 1 also starts from the l-1 solution with its heaviest atom
    split; if the l fit is still worse, the l-1 solution is reused

    Returns:
        list of FitResult, entry l-1 for l atoms
    """
    opts = opts or OptimizerOptions()
    _check_fit_inputs(fam, phi, k_max, domain)
    cache = PhiObjective(phi, fam, data)

    results = []
    for ell in range(1, k_max + 1):
        extra = [split_heaviest(results[-1].measure, domain)] if results else []
        current = multistart(cache, ell, domain, opts, _candidates(cache, ell, domain, opts, extra, True))
        if results and current.objective > results[-1].objective + 1e-12:
            previous = results[-1]
            logger.info(f"k={ell} fit worse than k={ell - 1}; reusing the smaller solution")
            current = FitResult(previous.measure, previous.objective, current.evaluations,
                                previous.converged, previous.start_index, previous.history)
        results.append(current)
    return results
