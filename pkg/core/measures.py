"""
Measures - discrete mixing measures and the distances between them
Holds the parameter box, the mixing measure type, exact Wasserstein
distances and multi-index moment vectors
"""

import itertools
import logging
from dataclasses import dataclass
from math import comb

import numpy as np
import ot
from scipy.spatial.distance import cdist

from core.errors import (
    AtomOutsideDomain,
    DimensionMismatch,
    InvalidDomain,
    NonPositiveWeight,
    WeightSumNotOne,
    ZeroScale,
)
import config

logger = logging.getLogger(__name__)

# A multi-index alpha = (alpha_1, ..., alpha_q); |alpha| is sum(alpha)
MultiIndex = tuple


@dataclass(frozen=True)
class ParamDomain:
    """
    Compact parameter box Theta = [lower_1, upper_1] x ... x [lower_q, upper_q]
    """
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) < 1 or len(lower) != len(upper):
            raise InvalidDomain("lower and upper must be nonempty and of equal length")
        for lo, hi in zip(lower, upper):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise InvalidDomain(f"invalid interval [{lo}, {hi}]")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @property
    def q(self):
        return len(self.lower)

    @property
    def width(self):
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def diameter(self):
        """Euclidean diameter of the box"""
        return float(np.linalg.norm(self.width))

    def contains(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def clamp(self, theta, margin=0.0):
        """Project theta into the box, optionally keeping a relative margin from the faces"""
        pad = margin * self.width
        return np.clip(np.asarray(theta, dtype=float),
                       np.asarray(self.lower) + pad,
                       np.asarray(self.upper) - pad)


@dataclass(frozen=True, eq=False)
class MixingMeasure:
    """
    Finite discrete measure G = sum_i p_i delta_{theta_i}

    Build it with make_measure(); atoms is a read-only (k, q) array and
    weights a read-only (k,) array
    """
    atoms: np.ndarray
    weights: np.ndarray
    domain: ParamDomain = None

    @property
    def k(self):
        return self.atoms.shape[0]

    @property
    def q(self):
        return self.atoms.shape[1]

    def heaviest_atom(self):
        # Stable: the first of equally heavy atoms wins
        return int(np.argmax(self.weights))

    def __repr__(self):
        parts = ", ".join(f"{p:.6g}*δ{tuple(np.round(a, 6))}" for a, p in zip(self.atoms, self.weights))
        return f"MixingMeasure({parts})"


def make_measure(atoms, weights, domain=None):
    """
    Validate atoms and weights and build a MixingMeasure

    Args:
        atoms: sequence of parameter vectors (scalars are read as q = 1)
        weights: sequence of probabilities, one per atom
        domain: optional ParamDomain every atom must lie in

    Returns:
        MixingMeasure with near-coincident atoms merged

    Raises:
        NonPositiveWeight, WeightSumNotOne, AtomOutsideDomain, DimensionMismatch
    """
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim == 1:
        atoms = atoms.reshape(-1, 1)
    weights = np.asarray(weights, dtype=float).reshape(-1)

    # Shape checks
    if atoms.ndim != 2 or atoms.shape[0] == 0 or atoms.shape[0] != weights.shape[0]:
        raise DimensionMismatch("atoms and weights must be nonempty and of equal length")
    if not np.all(np.isfinite(atoms)):
        raise AtomOutsideDomain("atoms must be finite")

    # Weight checks - degenerate weights are rejected, not dropped
    if np.any(~np.isfinite(weights)) or np.any(weights < config.MIN_WEIGHT):
        raise NonPositiveWeight(f"weights must be >= {config.MIN_WEIGHT}: {weights.tolist()}")
    if abs(weights.sum() - 1.0) > config.WEIGHT_SUM_TOL:
        raise WeightSumNotOne(f"weights sum to {weights.sum()!r}")

    # Domain checks
    if domain is not None:
        if domain.q != atoms.shape[1]:
            raise DimensionMismatch(f"domain has q={domain.q}, atoms have q={atoms.shape[1]}")
        for atom in atoms:
            if not domain.contains(atom):
                raise AtomOutsideDomain(f"atom {atom.tolist()} outside {domain}")

    atoms, weights = _merge_close_atoms(atoms, weights)
    atoms.setflags(write=False)
    weights.setflags(write=False)
    return MixingMeasure(atoms=atoms, weights=weights, domain=domain)


def _merge_close_atoms(atoms, weights):
    """Merge atoms within ATOM_MERGE_TOL in sup-norm, summing their weights (first atom kept)"""
    kept_atoms = []
    kept_weights = []
    for atom, weight in zip(atoms, weights):
        for idx, other in enumerate(kept_atoms):
            if np.max(np.abs(atom - other)) < config.ATOM_MERGE_TOL:
                kept_weights[idx] += weight
                break
        else:
            kept_atoms.append(atom.copy())
            kept_weights.append(float(weight))
    return np.array(kept_atoms), np.array(kept_weights)


def point_mass(theta, domain=None):
    """Convenience constructor for delta_theta"""
    return make_measure([np.atleast_1d(theta)], [1.0], domain)


def wasserstein(G, H, ell=1.0):
    """
    Exact Wasserstein-ell distance between two mixing measures

    Solves the transportation LP with row marginals G.weights and column
    marginals H.weights under the ground cost ||theta_i - theta'_j||_2^ell
    using POT's network simplex

    Args:
        G, H: MixingMeasure objects with the same q
        ell: real >= 1

    Returns:
        float: W_ell(G, H)
    """
    if G.q != H.q:
        raise DimensionMismatch(f"cannot compare q={G.q} with q={H.q}")
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")

    cost = cdist(G.atoms, H.atoms, metric='euclidean') ** ell
    # Both marginals are renormalized so their sums agree to machine precision
    p = np.ascontiguousarray(G.weights / G.weights.sum())
    p_prime = np.ascontiguousarray(H.weights / H.weights.sum())
    total = float(ot.emd2(p, p_prime, cost))
    return max(total, 0.0) ** (1.0 / ell)


def enumerate_multi_indices(q, order):
    """
    All multi-indices alpha in N^q with |alpha| <= order, graded lexicographic

    Within one degree, indices are listed with the first coordinate
    descending, e.g. (q=2, order=1) -> (0,0), (1,0), (0,1)
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    indices = []
    for degree in range(order + 1):
        # Compositions of degree into q nonnegative parts
        level = [alpha for alpha in itertools.product(range(degree + 1), repeat=q) if sum(alpha) == degree]
        level.sort(reverse=True)
        indices.extend(tuple(alpha) for alpha in level)
    assert len(indices) == comb(q + order, q)
    return indices


def moment_vector(G, order, theta0=None):
    """
    Moments m_alpha(G - theta0) = sum_i p_i (theta_i - theta0)^alpha for 1 <= |alpha| <= order

    Args:
        G: MixingMeasure
        order: highest total degree (>= 1)
        theta0: centering vector (default: the origin)

    Returns:
        dict: MultiIndex -> float, in graded lexicographic order
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    theta0 = np.zeros(G.q) if theta0 is None else np.atleast_1d(np.asarray(theta0, dtype=float))
    if theta0.shape[0] != G.q:
        raise DimensionMismatch(f"theta0 has length {theta0.shape[0]}, measure has q={G.q}")

    centered = G.atoms - theta0
    moments = {}
    for alpha in enumerate_multi_indices(G.q, order)[1:]:
        monomials = np.prod(centered ** np.asarray(alpha), axis=1)
        moments[alpha] = float(np.dot(G.weights, monomials))
    return moments


def univariate_moments(G, order, theta0=0.0):
    """Moment vector (m_1, ..., m_order) of a q = 1 measure as an array"""
    centered = G.atoms[:, 0] - float(theta0)
    powers = centered[None, :] ** np.arange(1, order + 1)[:, None]
    return powers @ G.weights


def shift_scale(G, theta, eps):
    """
    Map every atom theta_i to eps * (theta_i - theta); weights unchanged

    The result carries no parameter box since the box is not transformed
    """
    if eps == 0:
        raise ZeroScale("eps must be nonzero")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape[0] != G.q:
        raise DimensionMismatch(f"theta has length {theta.shape[0]}, measure has q={G.q}")
    return make_measure(eps * (G.atoms - theta), G.weights)


def with_domain(G, domain):
    """Attach (and check) a parameter box"""
    return make_measure(G.atoms, G.weights, domain)
