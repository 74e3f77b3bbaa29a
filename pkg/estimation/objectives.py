"""
Objectives - the three Phi-distance criteria evaluated against data
Kolmogorov-Smirnov statistic, maximum mean discrepancy with closed-form
or quadrature grams, and the sup-norm moment deviation
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.spatial.distance import cdist
from scipy.special import gammaln, ndtr, roots_jacobi

from core.errors import (
    EmptyData,
    IncompatiblePhiFamily,
    LengthMismatch,
    UnsupportedDimension,
    UnsupportedOrder,
)
from core.families import Gamma, GaussianLocation, as_data, check_measure_in_kernel_domain, t_bar
from core.measures import univariate_moments
import config

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Test-function classes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianRBF:
    """ker(x, y) = exp(-gamma ||x - y||^2)"""
    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise IncompatiblePhiFamily(f"rbf gamma must be > 0, got {self.gamma}")

    @property
    def sup_norm(self):
        return 1.0

    @property
    def width(self):
        return 1.0 / np.sqrt(self.gamma)

    def reach(self, cutoff):
        """Distance beyond which ker < cutoff"""
        return np.sqrt(-np.log(cutoff) / self.gamma)

    def from_sq_dists(self, sq):
        return np.exp(-self.gamma * sq)

    def spec(self):
        return f"rbf,gamma={self.gamma!r}"


@dataclass(frozen=True)
class Laplace:
    """ker(x, y) = exp(-||x - y|| / scale)"""
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise IncompatiblePhiFamily(f"laplace scale must be > 0, got {self.scale}")

    @property
    def sup_norm(self):
        return 1.0

    @property
    def width(self):
        return self.scale

    def reach(self, cutoff):
        return -np.log(cutoff) * self.scale

    def from_sq_dists(self, sq):
        return np.exp(-np.sqrt(sq) / self.scale)

    def spec(self):
        return f"laplace,scale={self.scale!r}"


@dataclass(frozen=True)
class KS:
    name = "ks"

    def spec(self):
        return "ks"


@dataclass(frozen=True)
class MMD:
    rkhs: object = field(default_factory=GaussianRBF)

    name = "mmd"

    def spec(self):
        return f"mmd({self.rkhs.spec()})"


@dataclass(frozen=True)
class Moments:
    order: int = 3
    theta0: float = 0.0

    name = "moments"

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise IncompatiblePhiFamily(f"moments order must be an integer >= 1, got {self.order}")
        object.__setattr__(self, 'order', int(self.order))
        object.__setattr__(self, 'theta0', float(self.theta0))

    def spec(self):
        return f"moments(order={self.order},theta0={self.theta0!r})"


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------

def mixture_cdf(fam, G, x):
    """F_G(x) = sum_i p_i F(x | theta_i)"""
    check_measure_in_kernel_domain(fam, G)
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[:-1] if fam.dim > 1 else x.shape)
    for atom, weight in zip(G.atoms, G.weights):
        total = total + weight * fam.cdf(x, atom)
    return np.clip(total, 0.0, 1.0)


def _ks_sorted(fam, G, sorted_data):
    """Two-sided one-sample statistic for a continuous F_G at sorted observations"""
    n = sorted_data.shape[0]
    F = mixture_cdf(fam, G, sorted_data)
    ranks = np.arange(1, n + 1) / n
    return float(max(np.max(F - (ranks - 1.0 / n)), np.max(ranks - F)))


def _ks_lattice(fam, G, points, ecdf):
    """Exact sup over the integer lattice for discrete families"""
    return float(np.max(np.abs(mixture_cdf(fam, G, points) - ecdf)))


def _ks_grid(fam, G, grid_u, grid_v, counts):
    """Sup over the data-anchored n x n grid of bivariate corners"""
    F = np.zeros(counts.shape)
    for atom, weight in zip(G.atoms, G.weights):
        F += weight * np.outer(ndtr((grid_u - atom[0]) / fam.sigma), ndtr((grid_v - atom[1]) / fam.sigma))
    return float(np.max(np.abs(F - counts)))


def ks_objective(fam, G, data, cache=None):
    """
    sup_x |F_G(x) - F_n(x)| against the empirical CDF of data

    Args:
        fam: KernelFamily with observations in d = 1 or 2 dimensions
        G: MixingMeasure
        data: observations
        cache: optional PhiObjective built for KS on the same data

    Returns:
        float in [0, 1]
    """
    cache = cache or PhiObjective(KS(), fam, data)
    return cache.ks(G)


# ---------------------------------------------------------------------------
# Maximum mean discrepancy
# ---------------------------------------------------------------------------

def _sq_dists(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1 and Y.ndim == 1:
        return np.subtract.outer(X, Y) ** 2
    return cdist(X.reshape(X.shape[0], -1), Y.reshape(Y.shape[0], -1), metric='sqeuclidean')


def _mean_gram(rkhs, X, Y, skip_diagonal=False):
    """(1/(mn)) sum_a sum_b ker(X_a, Y_b), summed in row blocks"""
    total = 0.0
    for start in range(0, len(X), config.GRAM_CHUNK):
        total += float(rkhs.from_sq_dists(_sq_dists(X[start:start + config.GRAM_CHUNK], Y)).sum())
    if skip_diagonal:
        # ker(x, x) = 1 for both kernels
        n = len(X)
        return (total - n) / (n * (n - 1))
    return total / (len(X) * len(Y))


def _pmf_nodes(fam, theta):
    """Support points and masses covering all but DISCRETE_TAIL_MASS of P_theta"""
    top = fam.quantile(1.0 - config.DISCRETE_TAIL_MASS, theta)
    support = np.arange(0.0, top + 1.0)
    return support, fam.density(support, theta)


def _hermite_nodes(fam, theta):
    z, w = hermegauss(config.HERMITE_NODES)
    return theta + fam.sigma * z, w / np.sqrt(2.0 * np.pi)


def _support(fam, theta):
    """Integration range of a continuous P_theta; Gamma starts exactly at its origin"""
    lo = 0.0 if isinstance(fam, Gamma) else fam.quantile(config.TAIL_MASS, theta)
    return lo, fam.quantile(1.0 - config.TAIL_MASS, theta)


def _gamma_regular_part(fam, theta, x):
    """p(x | theta) / x^(alpha - 1), smooth down to x = 0"""
    rate = fam.alpha / theta
    return np.exp(fam.alpha * np.log(rate) - gammaln(fam.alpha) - rate * x)


def _panel_rule(fam, theta, edges):
    """
    Nodes and weights for integrals against p(. | theta) over panels

    Args:
        fam: continuous univariate KernelFamily
        theta: mean parameter
        edges: array (m, P + 1), nondecreasing along each row

    Returns:
        (x, weights), each of shape (m, P * LEGENDRE_NODES); summing
        weights * g(x) along a row integrates g p over that row's range.
        Gamma panels that start at 0 use Gauss-Jacobi with x^(alpha - 1)
        in the weight function
    """
    left = edges[:, :-1, None]
    half = (edges[:, 1:, None] - left) / 2.0
    t, w = leggauss(config.LEGENDRE_NODES)
    x = left + half * (1.0 + t)
    with np.errstate(divide='ignore', invalid='ignore'):
        weights = half * w * fam.density(x, theta)
    if isinstance(fam, Gamma):
        s, v = roots_jacobi(config.LEGENDRE_NODES, 0.0, fam.alpha - 1.0)
        head_x = left + half * (1.0 + s)
        head_weights = half ** fam.alpha * v * _gamma_regular_part(fam, theta, head_x)
        head = left == 0.0
        x = np.where(head, head_x, x)
        weights = np.where(head, head_weights, weights)
    rows = edges.shape[0]
    return x.reshape(rows, -1), weights.reshape(rows, -1)


def _side_edges(fam, a, b, count):
    """
    Panel edges on [a, b] for each row: count equal panels, refined for Gamma
    by geometric edges from a so no panel is wide next to the origin
    """
    edges = a[:, None] + (b - a)[:, None] * np.linspace(0.0, 1.0, count + 1)
    if not isinstance(fam, Gamma):
        return edges
    start = np.where(a > 0.0, a, 1.0)
    steps = np.linspace(0.0, 1.0, config.GEOMETRIC_PANELS + 1)
    geometric = np.where(a[:, None] > 0.0, start[:, None] * (b / start)[:, None] ** steps, 0.0)
    geometric = np.clip(geometric, a[:, None], b[:, None])
    return np.sort(np.concatenate([edges, geometric], axis=1), axis=1)


def _windowed_embedding(fam, theta, rkhs, points):
    """E_theta ker(X, y) over the window where ker(., y) >= KERNEL_CUTOFF, split at y"""
    lo, hi = _support(fam, theta)
    reach = rkhs.reach(config.KERNEL_CUTOFF)
    a = np.clip(points - reach, lo, hi)
    b = np.clip(points + reach, lo, hi)
    kink = np.clip(points, a, b)
    count = config.QUADRATURE_PANELS // 2
    edges = np.concatenate([_side_edges(fam, a, kink, count), _side_edges(fam, kink, b, count)[:, 1:]], axis=1)
    x, weights = _panel_rule(fam, theta, edges)
    return np.sum(weights * rkhs.from_sq_dists((x - points[:, None]) ** 2), axis=1)


def _outer_nodes(fam, theta, width):
    """Nodes and weights for E_theta g(Y) when g varies on the scale width"""
    if fam.is_discrete:
        return _pmf_nodes(fam, theta)
    if isinstance(fam, GaussianLocation):
        return _hermite_nodes(fam, theta)
    lo, hi = _support(fam, theta)
    count = int(np.clip(np.ceil((hi - lo) / width), config.QUADRATURE_PANELS, config.MAX_OUTER_PANELS))
    edges = np.linspace(lo, hi, count + 1)
    # Geometric panels toward the origin
    graded = edges[1] * 0.5 ** np.arange(config.GRADED_PANELS, 0, -1)
    edges = np.concatenate([[0.0], graded, edges[1:]])
    x, weights = _panel_rule(fam, theta, edges[None, :])
    return x[0], weights[0]


def kernel_mean(fam, rkhs, theta, points, method="auto"):
    """
    Kernel mean embedding of P_theta evaluated at points: E_theta ker(X, y)

    Gaussian location with the RBF kernel uses the closed form unless
    method="quadrature". Discrete families sum the pmf; continuous ones
    use composite Gauss-Legendre panels over the kernel's window around y
    """
    theta = fam.check_theta(theta)
    points = np.asarray(points, dtype=float)
    if isinstance(fam, GaussianLocation) and isinstance(rkhs, GaussianRBF) and method == "auto":
        a2 = fam.alpha ** 2
        denom = a2 + 2.0 * rkhs.gamma
        sq = _sq_dists(points, np.atleast_1d(theta)[None, :] if fam.d > 1 else np.array([theta]))[:, 0]
        return (fam.alpha / np.sqrt(denom)) ** fam.d * np.exp(-a2 * rkhs.gamma * sq / denom)
    if fam.dim != 1:
        raise UnsupportedDimension(f"quadrature embeddings need a univariate family, got {fam.spec()}")
    if fam.is_discrete:
        nodes, weights = _pmf_nodes(fam, theta)
        return rkhs.from_sq_dists(_sq_dists(points, nodes)) @ weights
    points = points.reshape(-1)
    pieces = [_windowed_embedding(fam, theta, rkhs, points[start:start + config.GRAM_CHUNK])
              for start in range(0, points.shape[0], config.GRAM_CHUNK)]
    return np.concatenate(pieces) if pieces else np.zeros(0)


def mmd_gram(fam, rkhs, theta, theta2, method="auto"):
    """
    K(theta, theta') = E ker(Z, Z') with Z ~ P_theta and Z' ~ P_theta' independent

    Closed form for Gaussian location with the RBF kernel:
    (alpha / sqrt(alpha^2 + 4 gamma))^d exp(-alpha^2 gamma ||theta - theta'||^2 / (alpha^2 + 4 gamma))
    """
    theta = fam.check_theta(theta)
    theta2 = fam.check_theta(theta2)
    if isinstance(fam, GaussianLocation) and isinstance(rkhs, GaussianRBF) and method == "auto":
        a2 = fam.alpha ** 2
        denom = a2 + 4.0 * rkhs.gamma
        sq = float(np.sum((np.atleast_1d(theta) - np.atleast_1d(theta2)) ** 2))
        return float((fam.alpha / np.sqrt(denom)) ** fam.d * np.exp(-a2 * rkhs.gamma * sq / denom))
    if fam.dim != 1:
        raise UnsupportedDimension(f"quadrature grams need a univariate family, got {fam.spec()}")
    nodes, weights = _outer_nodes(fam, theta2, rkhs.width)
    return float(kernel_mean(fam, rkhs, theta, nodes, method="quadrature") @ weights)


def mmd_jn(fam, rkhs, theta, data, method="auto"):
    """J_n(theta) = (1/n) sum_i E_theta ker(X, X_i)"""
    data = as_data(fam, data)
    return float(np.mean(kernel_mean(fam, rkhs, theta, data, method=method)))


def _gram_matrix(fam, rkhs, G, H):
    return np.array([[mmd_gram(fam, rkhs, a, b) for b in H.atoms] for a in G.atoms])


def mmd_objective(fam, rkhs, G, data, include_data_term=False, cache=None):
    """
    sum_ij p_i p_j K(theta_i, theta_j) - 2 sum_i p_i J_n(theta_i)

    This is D^2_MMD(P_G, empirical) minus the G-independent data term;
    include_data_term=True adds it back
    """
    cache = cache or PhiObjective(MMD(rkhs), fam, data)
    value = cache.mmd(G)
    if include_data_term:
        value += cache.data_term
    return value


def mmd_distance(fam, rkhs, G, data, cache=None):
    """D_MMD(P_G, empirical) = sqrt(objective + data term)"""
    cache = cache or PhiObjective(MMD(rkhs), fam, data)
    return cache.distance(G)


def mmd_population(fam, rkhs, G, H):
    """Exact D^2_MMD(P_G, P_H) from grams"""
    check_measure_in_kernel_domain(fam, G)
    check_measure_in_kernel_domain(fam, H)
    value = (G.weights @ _gram_matrix(fam, rkhs, G, G) @ G.weights
             + H.weights @ _gram_matrix(fam, rkhs, H, H) @ H.weights
             - 2.0 * G.weights @ _gram_matrix(fam, rkhs, G, H) @ H.weights)
    return max(float(value), 0.0)


def mmd_squared_empirical(rkhs, samples_p, samples_q, unbiased=False):
    """
    Plug-in estimate of D^2_MMD between two samples

    The default V-statistic keeps the diagonal and is always >= 0;
    unbiased=True drops the diagonals of the within-sample terms
    """
    samples_p = np.asarray(samples_p, dtype=float)
    samples_q = np.asarray(samples_q, dtype=float)
    if len(samples_p) == 0 or len(samples_q) == 0:
        raise EmptyData("both samples must be nonempty")
    if unbiased and (len(samples_p) < 2 or len(samples_q) < 2):
        raise EmptyData("the unbiased statistic needs two points per sample")
    value = (_mean_gram(rkhs, samples_p, samples_p, skip_diagonal=unbiased)
             - 2.0 * _mean_gram(rkhs, samples_p, samples_q)
             + _mean_gram(rkhs, samples_q, samples_q, skip_diagonal=unbiased))
    return value if unbiased else max(value, 0.0)


# ---------------------------------------------------------------------------
# Generalized method of moments
# ---------------------------------------------------------------------------

def moment_objective(fam, G, tbar, theta0, order=None):
    """
    || m(G - theta0) - tbar ||_inf with moments of orders 1..len(tbar)

    Args:
        fam: univariate KernelFamily (only used for the dimension check)
        G: MixingMeasure with q = 1
        tbar: estimated moment vector
        theta0: centering point
        order: optional expected length of tbar
    """
    tbar = np.asarray(tbar, dtype=float).reshape(-1)
    if tbar.shape[0] == 0 or (order is not None and tbar.shape[0] != order):
        raise LengthMismatch(f"tbar has length {tbar.shape[0]}, expected {order}")
    if fam.dim != 1 or G.q != 1:
        raise IncompatiblePhiFamily("moment objectives need univariate measures")
    return float(np.max(np.abs(univariate_moments(G, tbar.shape[0], theta0) - tbar)))


# ---------------------------------------------------------------------------
# Dispatch and precomputation
# ---------------------------------------------------------------------------

def check_compatible(phi, fam):
    """Raise IncompatiblePhiFamily (or UnsupportedDimension for KS) when phi cannot be used with fam"""
    if isinstance(phi, KS):
        if fam.dim > 2:
            raise UnsupportedDimension(f"KS is evaluated for d <= 2, got d={fam.dim}")
    elif isinstance(phi, MMD):
        closed_form = isinstance(fam, GaussianLocation) and isinstance(phi.rkhs, GaussianRBF)
        if fam.dim != 1 and not closed_form:
            raise IncompatiblePhiFamily(f"{phi.spec()} with {fam.spec()} needs the RBF closed form")
    elif isinstance(phi, Moments):
        if fam.dim != 1:
            raise IncompatiblePhiFamily(f"moments need a univariate family, got {fam.spec()}")
        if not fam.in_closure(phi.theta0):
            raise IncompatiblePhiFamily(f"theta0={phi.theta0} outside the mean domain of {fam.spec()}")
        if fam.moment_coefficients(phi.order)[phi.order] == 0:
            raise IncompatiblePhiFamily(f"{fam.spec()} has no orthogonal statistic of order {phi.order}")
    else:
        raise IncompatiblePhiFamily(f"unknown test-function class {phi!r}")


class PhiObjective:
    """
    Phi-objective bound to one data set

    Everything that depends only on the data (sorted sample, empirical CDF
    grid, moment estimates, the MMD data-data term) is computed once here;
    evaluating a candidate measure afterwards never re-reads the raw data
    except for J_n, which depends on the candidate
    """

    def __init__(self, phi, fam, data):
        check_compatible(phi, fam)
        self.phi = phi
        self.fam = fam
        self.data = as_data(fam, data)
        self.n = self.data.shape[0]
        self._data_term = None

        if isinstance(phi, KS):
            self._prepare_ks()
        elif isinstance(phi, Moments):
            try:
                self.tbar = t_bar(fam, self.data, phi.order, phi.theta0)
            except UnsupportedOrder as exc:
                raise IncompatiblePhiFamily(str(exc)) from exc

    def _prepare_ks(self):
        if self.fam.dim == 2:
            self.grid_u = np.sort(self.data[:, 0])
            self.grid_v = np.sort(self.data[:, 1])
            # Empirical counts #{X_1 <= u_a, X_2 <= v_b} by a 2-D cumulative histogram
            rows = np.searchsorted(self.grid_u, self.data[:, 0], side='left')
            cols = np.searchsorted(self.grid_v, self.data[:, 1], side='left')
            hist = np.zeros((self.n, self.n))
            np.add.at(hist, (rows, cols), 1.0)
            self.counts = hist.cumsum(axis=0).cumsum(axis=1) / self.n
        elif self.fam.is_discrete:
            self.sorted_data = np.sort(self.data)
            values = np.unique(self.sorted_data)
            self.points = np.unique(np.concatenate([values - 1.0, values]))
            self.ecdf = np.searchsorted(self.sorted_data, self.points, side='right') / self.n
        else:
            self.sorted_data = np.sort(self.data)

    def ks(self, G):
        if self.fam.dim == 2:
            check_measure_in_kernel_domain(self.fam, G)
            return _ks_grid(self.fam, G, self.grid_u, self.grid_v, self.counts)
        if self.fam.is_discrete:
            return _ks_lattice(self.fam, G, self.points, self.ecdf)
        return _ks_sorted(self.fam, G, self.sorted_data)

    def mmd(self, G):
        check_measure_in_kernel_domain(self.fam, G)
        rkhs = self.phi.rkhs
        gram = _gram_matrix(self.fam, rkhs, G, G)
        jn = np.array([mmd_jn(self.fam, rkhs, atom, self.data) for atom in G.atoms])
        return float(G.weights @ gram @ G.weights - 2.0 * G.weights @ jn)

    @property
    def data_term(self):
        """(1/n^2) sum_a sum_b ker(X_a, X_b), computed on first use"""
        if self._data_term is None:
            self._data_term = _mean_gram(self.phi.rkhs, self.data, self.data)
        return self._data_term

    def moments(self, G):
        return moment_objective(self.fam, G, self.tbar, self.phi.theta0)

    def __call__(self, G):
        """Optimization surrogate; same argmin as the Phi-distance"""
        if isinstance(self.phi, KS):
            return self.ks(G)
        if isinstance(self.phi, MMD):
            return self.mmd(G)
        return self.moments(G)

    def distance(self, G):
        """sup_phi |G phi - tbar_phi|: KS statistic, D_MMD, or moment sup-norm"""
        if isinstance(self.phi, MMD):
            return float(np.sqrt(max(self.mmd(G) + self.data_term, 0.0)))
        return self(G)


def phi_objective(phi, fam, G, data, cache=None):
    """Dispatch to ks_objective, mmd_objective or moment_objective"""
    cache = cache or PhiObjective(phi, fam, data)
    return cache(G)


def phi_distance(phi, fam, G, data, cache=None):
    """The Phi-distance between the mixture P_G and the data"""
    cache = cache or PhiObjective(phi, fam, data)
    return cache.distance(G)


# ---------------------------------------------------------------------------
# Population distances between two mixing measures
# ---------------------------------------------------------------------------

def population_grid(fam, domain, size=None):
    """
    Observation grid covering the box's induced data range

    Spans [lower - pad, upper + pad] per coordinate with pad = POPULATION_PAD_SD
    component standard deviations; discrete families use the integer lattice
    """
    size = size or config.POPULATION_GRID
    lower = np.asarray(domain.lower, dtype=float)
    upper = np.asarray(domain.upper, dtype=float)
    # Largest component spread over the box faces
    spread = max(fam.std(c) for c in np.concatenate([lower, upper]))
    lo = lower - config.POPULATION_PAD_SD * spread
    hi = upper + config.POPULATION_PAD_SD * spread
    if fam.is_discrete:
        return np.arange(max(np.floor(lo[0]), 0.0) - 1.0, np.ceil(hi[0]) + 1.0)
    if fam.dim == 1:
        return np.linspace(lo[0], hi[0], size)
    per_axis = max(int(round(size ** (1.0 / fam.dim))), 2)
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, fam.dim)


def ks_population(fam, G, H, grid):
    """sup over grid of |F_G - F_H|"""
    return float(np.max(np.abs(mixture_cdf(fam, G, grid) - mixture_cdf(fam, H, grid))))


def population_distance(phi, fam, G, H, grid=None):
    """
    Population Phi-distance sup_phi |G phi - H phi|

    KS uses the sup of |F_G - F_H| over grid; MMD uses exact grams;
    Moments uses exact moment vectors
    """
    check_compatible(phi, fam)
    return _population_distance(phi, fam, G, H, grid)


def _population_distance(phi, fam, G, H, grid):
    if isinstance(phi, KS):
        if grid is None:
            raise EmptyData("a population grid is needed for KS")
        return ks_population(fam, G, H, grid)
    if isinstance(phi, MMD):
        return float(np.sqrt(mmd_population(fam, phi.rkhs, G, H)))
    return float(np.max(np.abs(univariate_moments(G, phi.order, phi.theta0)
                               - univariate_moments(H, phi.order, phi.theta0))))


class PopulationObjective:
    """Population Phi-distance to a fixed target measure, shaped like PhiObjective for the optimizer"""

    def __init__(self, phi, fam, target, grid=None):
        check_compatible(phi, fam)
        if isinstance(phi, KS) and grid is None:
            raise EmptyData("a population grid is needed for KS")
        self.phi = phi
        self.fam = fam
        self.target = target
        self.grid = grid

    def __call__(self, G):
        return _population_distance(self.phi, self.fam, G, self.target, self.grid)

    def distance(self, G):
        return self(G)
