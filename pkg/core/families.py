"""
Kernel Families - component distributions P_theta in mean parameterization
Five NEF-QVF families (Gaussian location, Poisson, Gamma, Binomial,
Negative Binomial) with density, CDF, sampling, moment polynomials and
the orthogonal statistics t_j used by the generalized method of moments
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial import Polynomial
from scipy import stats
from scipy.special import ndtr

from core.errors import (
    AtomOutOfKernelDomain,
    DimensionMismatch,
    EmptyData,
    ParameterOutOfDomain,
    SupportViolation,
    Theta0OutOfDomain,
    UnsupportedFamily,
    UnsupportedOrder,
)
from core.random_streams import make_stream


@lru_cache(maxsize=None)
def stirling2(n, k):
    """Stirling numbers of the second kind S(n, k)"""
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


@dataclass(frozen=True)
class MomentPolynomial:
    """
    E_theta[X^i] as a polynomial in theta

    coefficients[l] is the exact rational coefficient of theta^l
    """
    coefficients: tuple

    @property
    def degree(self):
        return len(self.coefficients) - 1

    @property
    def leading(self):
        return self.coefficients[-1]

    def as_polynomial(self):
        return Polynomial([float(c) for c in self.coefficients])

    def __call__(self, theta):
        return self.as_polynomial()(theta)


@dataclass(frozen=True)
class KernelFamily(ABC):
    """
    Base class for a component family {P_theta} parameterized by its mean

    Subclasses fix their nuisance parameters at construction and implement
    the distribution-specific pieces
    """

    name = "family"
    is_discrete = False

    @property
    def dim(self):
        """Dimension d of one observation (and q of one parameter)"""
        return 1

    @property
    @abstractmethod
    def mean_domain(self):
        """Open interval (lower, upper) of admissible means"""

    @abstractmethod
    def spec(self):
        """Canonical family spec string, e.g. gamma(alpha=2.0)"""

    @abstractmethod
    def _frozen(self, theta):
        """scipy.stats frozen distribution at a validated theta"""

    @abstractmethod
    def _draw(self, thetas, rng):
        """One draw per entry of the validated array thetas"""

    @abstractmethod
    def moment_coefficients(self, i):
        """Exact coefficients of E_theta[X^i] in powers of theta"""

    def check_theta(self, theta):
        """Validate a mean parameter and return it as a float"""
        value = np.asarray(theta, dtype=float).reshape(-1)
        if value.shape[0] != 1:
            raise DimensionMismatch(f"{self.spec()} takes a scalar mean, got {value.tolist()}")
        value = float(value[0])
        lower, upper = self.mean_domain
        if not (lower < value < upper):
            raise ParameterOutOfDomain(f"theta={value} outside {self.mean_domain} for {self.spec()}")
        return value

    def in_closure(self, theta):
        lower, upper = self.mean_domain
        return lower <= theta <= upper

    def check_support(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_discrete and np.any(x != np.floor(x)):
            raise SupportViolation(f"{self.spec()} observations must be integers")

    def density(self, x, theta):
        """Density (or mass) p(x | theta); x may be an array"""
        theta = self.check_theta(theta)
        self.check_support(x)
        dist = self._frozen(theta)
        if self.is_discrete:
            return dist.pmf(x)
        return dist.pdf(x)

    def cdf(self, x, theta):
        """F(x | theta); x may be an array"""
        theta = self.check_theta(theta)
        return self._frozen(theta).cdf(x)

    def quantile(self, u, theta):
        theta = self.check_theta(theta)
        return self._frozen(theta).ppf(u)

    @abstractmethod
    def std(self, theta):
        """Standard deviation of P_theta"""

    def sample(self, theta, rng, size=None):
        """
        Draw from P_theta

        Args:
            theta: mean parameter
            rng: numpy Generator (its state advances)
            size: None for one observation, or a number of draws

        Returns:
            one observation, or an array of observations
        """
        theta = self.check_theta(theta)
        count = 1 if size is None else int(size)
        draws = self._draw(np.full(count, theta), rng)
        return draws[0] if size is None else draws

    def moment_polynomial(self, i):
        """E_theta[X^i] as a MomentPolynomial of degree i"""
        if i < 0:
            raise UnsupportedOrder("moment order must be >= 0")
        if self.dim != 1:
            raise UnsupportedFamily(f"moment polynomials need a univariate family, got {self.spec()}")
        return MomentPolynomial(tuple(self.moment_coefficients(i)))

    def __str__(self):
        return self.spec()


@dataclass(frozen=True)
class GaussianLocation(KernelFamily):
    """N(theta, sigma^2 I_d); theta is the mean vector"""
    sigma: float = 1.0
    d: int = 1

    name = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0:
            raise UnsupportedFamily(f"sigma must be > 0, got {self.sigma}")
        if int(self.d) != self.d or self.d < 1:
            raise UnsupportedFamily(f"d must be an integer >= 1, got {self.d}")
        object.__setattr__(self, 'sigma', float(self.sigma))
        object.__setattr__(self, 'd', int(self.d))

    @property
    def dim(self):
        return self.d

    @property
    def alpha(self):
        """Precision-style scale 1/sigma used by the MMD closed forms"""
        return 1.0 / self.sigma

    @property
    def mean_domain(self):
        return (-np.inf, np.inf)

    def spec(self):
        return f"gaussian(sigma={self.sigma!r},d={self.d})"

    def check_theta(self, theta):
        value = np.asarray(theta, dtype=float).reshape(-1)
        if value.shape[0] != self.d:
            raise DimensionMismatch(f"{self.spec()} takes a mean of length {self.d}, got {value.tolist()}")
        if not np.all(np.isfinite(value)):
            raise ParameterOutOfDomain(f"theta={value.tolist()} must be finite")
        return float(value[0]) if self.d == 1 else value

    def _frozen(self, theta):
        return stats.norm(loc=theta, scale=self.sigma)

    def density(self, x, theta):
        theta = self.check_theta(theta)
        if self.d == 1:
            return stats.norm.pdf(x, loc=theta, scale=self.sigma)
        x = np.asarray(x, dtype=float)
        return np.prod(stats.norm.pdf(x, loc=theta, scale=self.sigma), axis=-1)

    def cdf(self, x, theta):
        theta = self.check_theta(theta)
        z = (np.asarray(x, dtype=float) - theta) / self.sigma
        if self.d == 1:
            return ndtr(z)
        # Product of coordinate CDFs for the isotropic multivariate family
        return np.prod(ndtr(z), axis=-1)

    def quantile(self, u, theta):
        if self.d != 1:
            raise UnsupportedFamily("quantiles need a univariate family")
        return super().quantile(u, theta)

    def std(self, theta):
        return self.sigma

    def sample(self, theta, rng, size=None):
        theta = self.check_theta(theta)
        count = 1 if size is None else int(size)
        draws = self._draw(np.tile(theta, (count, 1)) if self.d > 1 else np.full(count, theta), rng)
        return draws[0] if size is None else draws

    def _draw(self, thetas, rng):
        return thetas + self.sigma * rng.standard_normal(thetas.shape)

    def moment_coefficients(self, i):
        # E(theta + sigma Z)^i = sum over even j of C(i, j) (j-1)!! sigma^j theta^(i-j)
        variance = Fraction(self.sigma) ** 2
        coefficients = [Fraction(0)] * (i + 1)
        double_factorial = 1
        for j in range(0, i + 1, 2):
            if j > 0:
                double_factorial *= j - 1
            coefficients[i - j] = comb(i, j) * double_factorial * variance ** (j // 2)
        return coefficients


@dataclass(frozen=True)
class Poisson(KernelFamily):
    name = "poisson"
    is_discrete = True

    @property
    def mean_domain(self):
        return (0.0, np.inf)

    def spec(self):
        return "poisson"

    def _frozen(self, theta):
        return stats.poisson(theta)

    def check_support(self, x):
        super().check_support(x)
        if np.any(np.asarray(x) < 0):
            raise SupportViolation("poisson observations must be >= 0")

    def std(self, theta):
        return float(np.sqrt(theta))

    def _draw(self, thetas, rng):
        return rng.poisson(thetas).astype(float)

    def moment_coefficients(self, i):
        # Factorial moments E[(X)_j] = theta^j
        return [Fraction(stirling2(i, j)) for j in range(i + 1)]


@dataclass(frozen=True)
class Gamma(KernelFamily):
    """Gamma with fixed shape alpha and rate alpha/theta"""
    alpha: float = 1.0

    name = "gamma"

    def __post_init__(self):
        if not self.alpha > 0:
            raise UnsupportedFamily(f"alpha must be > 0, got {self.alpha}")
        object.__setattr__(self, 'alpha', float(self.alpha))

    @property
    def mean_domain(self):
        return (0.0, np.inf)

    def spec(self):
        return f"gamma(alpha={self.alpha!r})"

    def _frozen(self, theta):
        return stats.gamma(a=self.alpha, scale=theta / self.alpha)

    def check_support(self, x):
        if np.any(np.asarray(x) < 0):
            raise SupportViolation("gamma observations must be >= 0")

    def std(self, theta):
        return theta / np.sqrt(self.alpha)

    def _draw(self, thetas, rng):
        return rng.gamma(self.alpha, thetas / self.alpha)

    def moment_coefficients(self, i):
        # E X^i = alpha^(i rising) (theta / alpha)^i
        alpha = Fraction(self.alpha)
        leading = Fraction(1)
        for j in range(i):
            leading *= (alpha + j) / alpha
        return [Fraction(0)] * i + [leading]


@dataclass(frozen=True)
class Binomial(KernelFamily):
    """Binomial with m trials and success probability theta/m"""
    m: int = 1

    name = "binomial"
    is_discrete = True

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise UnsupportedFamily(f"m must be an integer >= 1, got {self.m}")
        object.__setattr__(self, 'm', int(self.m))

    @property
    def mean_domain(self):
        return (0.0, float(self.m))

    def spec(self):
        return f"binomial(m={self.m})"

    def _frozen(self, theta):
        return stats.binom(self.m, theta / self.m)

    def check_support(self, x):
        super().check_support(x)
        x = np.asarray(x)
        if np.any(x < 0) or np.any(x > self.m):
            raise SupportViolation(f"binomial observations must lie in 0..{self.m}")

    def std(self, theta):
        return float(np.sqrt(theta * (1.0 - theta / self.m)))

    def _draw(self, thetas, rng):
        return rng.binomial(self.m, thetas / self.m).astype(float)

    def moment_coefficients(self, i):
        # Factorial moments E[(X)_j] = (m)_j / m^j theta^j
        coefficients = []
        falling = Fraction(1)
        for j in range(i + 1):
            if j > 0:
                falling *= Fraction(self.m - j + 1, self.m)
            coefficients.append(stirling2(i, j) * falling)
        return coefficients


@dataclass(frozen=True)
class NegativeBinomial(KernelFamily):
    """Failures before the r-th success, success probability r/(r+theta)"""
    r: float = 1.0

    name = "negbinomial"
    is_discrete = True

    def __post_init__(self):
        if not self.r > 0:
            raise UnsupportedFamily(f"r must be > 0, got {self.r}")
        object.__setattr__(self, 'r', float(self.r))

    @property
    def mean_domain(self):
        return (0.0, np.inf)

    def spec(self):
        return f"negbinomial(r={self.r!r})"

    def _frozen(self, theta):
        return stats.nbinom(self.r, self.r / (self.r + theta))

    def check_support(self, x):
        super().check_support(x)
        if np.any(np.asarray(x) < 0):
            raise SupportViolation("negbinomial observations must be >= 0")

    def std(self, theta):
        return float(np.sqrt(theta + theta * theta / self.r))

    def _draw(self, thetas, rng):
        return rng.negative_binomial(self.r, self.r / (self.r + thetas)).astype(float)

    def moment_coefficients(self, i):
        # Factorial moments E[(X)_j] = r^(j rising) / r^j theta^j
        r = Fraction(self.r)
        coefficients = []
        rising = Fraction(1)
        for j in range(i + 1):
            if j > 0:
                rising *= (r + j - 1) / r
            coefficients.append(stirling2(i, j) * rising)
        return coefficients


def as_data(fam, data):
    """
    Coerce observations to the family's array layout

    Returns a float array of shape (n,) for univariate families and (n, d)
    otherwise; raises EmptyData for n = 0
    """
    data = np.asarray(data, dtype=float)
    if fam.dim == 1:
        data = data.reshape(-1)
    else:
        data = data.reshape(-1, fam.dim) if data.size else data.reshape(0, fam.dim)
    if data.shape[0] == 0:
        raise EmptyData("no observations")
    return data


def check_measure_in_kernel_domain(fam, G):
    """Every atom of G must be an admissible mean for fam"""
    if G.q != fam.dim:
        raise DimensionMismatch(f"measure has q={G.q}, {fam.spec()} needs q={fam.dim}")
    for atom in G.atoms:
        try:
            fam.check_theta(atom)
        except ParameterOutOfDomain as exc:
            raise AtomOutOfKernelDomain(str(exc)) from exc


def sample_mixture(fam, G, n, seed):
    """
    n i.i.d. draws from the mixture P_G by ancestral sampling

    Args:
        fam: KernelFamily
        G: MixingMeasure whose atoms are admissible means
        n: number of draws (>= 1)
        seed: 64-bit seed of the Philox stream

    Returns:
        array of shape (n,) or (n, d); bit-reproducible given seed
    """
    if n < 1:
        raise EmptyData("n must be >= 1")
    check_measure_in_kernel_domain(fam, G)
    rng = make_stream(seed)

    # Component labels first, then one observation per label
    labels = rng.choice(G.k, size=int(n), p=G.weights / G.weights.sum())
    thetas = G.atoms[labels]
    if fam.dim == 1:
        thetas = thetas[:, 0]
    return fam._draw(thetas, rng)


def orthogonal_coefficients(fam, j, theta0):
    """
    Exact coefficients a_0..a_j of t_j(x | theta0) = sum_i a_i x^i

    Solves sum_i a_i E_theta[X^i] = (theta - theta0)^j coefficient by
    coefficient; the system is triangular because E_theta[X^i] has degree i
    """
    if j < 1:
        raise UnsupportedOrder("j must be >= 1")
    if fam.dim != 1:
        raise UnsupportedFamily(f"orthogonal statistics need a univariate family, got {fam.spec()}")
    theta0 = float(theta0)
    if not fam.in_closure(theta0):
        raise Theta0OutOfDomain(f"theta0={theta0} outside the closure of {fam.mean_domain}")

    moments = [fam.moment_coefficients(i) for i in range(j + 1)]
    if moments[j][j] == 0:
        raise UnsupportedOrder(f"{fam.spec()} has no orthogonal statistic of order {j}")

    # Target (theta - theta0)^j in powers of theta
    shift = Fraction(theta0)
    target = [comb(j, l) * (-shift) ** (j - l) for l in range(j + 1)]

    # Back substitution from the top degree down
    a = [Fraction(0)] * (j + 1)
    for l in range(j, -1, -1):
        residual = target[l] - sum(a[i] * moments[i][l] for i in range(l + 1, j + 1))
        a[l] = residual / moments[l][l]
    return a


def orthogonal_stat(fam, j, theta0):
    """t_j(x | theta0) as a numpy Polynomial in x with E_theta t_j = (theta - theta0)^j"""
    return Polynomial([float(c) for c in orthogonal_coefficients(fam, j, theta0)])


def t_bar(fam, data, order, theta0):
    """
    Sample means of t_1, ..., t_order at theta0

    Returns:
        array of length order; entry j-1 estimates m_j(G - theta0)
    """
    if order < 1:
        raise UnsupportedOrder("order must be >= 1")
    data = as_data(fam, data)
    return np.array([orthogonal_stat(fam, j, theta0)(data).mean() for j in range(1, order + 1)])

