"""
Studies - Monte Carlo convergence-rate and order-selection experiments
Every replication draws its own data from the stream mix_seed(seed, n, r),
fits, and records the Wasserstein error against the truth
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from scipy.stats import linregress

from core.errors import ConfigError, KTooSmall, NonPositiveMean, TooFewRows
from core.families import check_measure_in_kernel_domain, sample_mixture
from core.measures import wasserstein, with_domain
from core.random_streams import mix_seed
from estimation.objectives import Moments, phi_distance
from estimation.optimizer import OptimizerOptions, fit
from estimation.order_selection import plug_in
from utils.file_io import read_measure
from utils.spec_validator import parse_domain, parse_family, parse_phi
import config

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RateStudyConfig:
    """
    One Monte Carlo study

    k=None selects plug-in mode (order estimated up to k_max); power=True
    records W_ell^ell instead of W_ell
    """
    family: object
    truth: object
    phi: object
    domain: object
    n_grid: tuple
    replications: int = 1
    k: int = None
    k_max: int = 4
    ell: float = 1.0
    power: bool = False
    seed: int = config.DEFAULT_SEED
    opts: OptimizerOptions = OptimizerOptions()
    c1: float = None
    threads: int = 1
    median: bool = False
    inject_truth: bool = False
    use_default_starts: bool = True

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if not grid:
            raise ConfigError("n_grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"n_grid must be strictly increasing, got {list(grid)}")
        if grid[0] < 2:
            raise ConfigError("every n must be >= 2")
        object.__setattr__(self, 'n_grid', grid)
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if self.k is not None and self.k < 1:
            raise KTooSmall(f"k must be >= 1, got {self.k}")
        if self.k_max < 1:
            raise KTooSmall(f"k_max must be >= 1, got {self.k_max}")
        if self.ell < 1:
            raise ConfigError(f"ell must be >= 1, got {self.ell}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if isinstance(self.phi, Moments):
            atoms = self.k if self.k is not None else self.k_max
            if self.phi.order < 2 * atoms - 1:
                raise ConfigError(f"moments order {self.phi.order} is below 2k-1 = {2 * atoms - 1}")
        if not self.use_default_starts and not self.inject_truth:
            raise ConfigError("use_default_starts=false needs inject_truth=true")
        # Truth must sit in both the box and the kernel domain
        object.__setattr__(self, 'truth', with_domain(self.truth, self.domain))
        check_measure_in_kernel_domain(self.family, self.truth)

    @property
    def plugin_mode(self):
        return self.k is None


@dataclass(frozen=True)
class StudyRow:
    n: int
    mean: float
    se: float
    reps: int
    frac_correct: float = None
    median: float = None


@dataclass(frozen=True)
class ReplicationRecord:
    """
    One replication; process_term is the Phi-distance between the truth and
    the sample, k_hat is None for known-k fits
    """
    n: int
    r: int
    seed: int
    error: float
    objective: float
    process_term: float
    k_hat: int = None
    determined: bool = True


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float


def _replicate(cfg, n, r):
    seed = mix_seed(cfg.seed, n, r)
    data = sample_mixture(cfg.family, cfg.truth, n, seed)
    # Starts inside the fit are keyed by the replication seed
    opts = replace(cfg.opts, seed=seed, threads=1)

    if cfg.plugin_mode:
        order = plug_in(cfg.family, cfg.phi, data, cfg.k_max, cfg.domain, opts, cfg.c1)
        result, k_hat, determined = order.plug_in, order.k_hat, order.determined
    else:
        starts = [cfg.truth] if cfg.inject_truth else []
        result = fit(cfg.family, cfg.phi, data, cfg.k, cfg.domain, opts,
                     starts=starts, use_default_starts=cfg.use_default_starts)
        k_hat, determined = None, True

    error = wasserstein(result.measure, cfg.truth, cfg.ell)
    if cfg.power:
        error = error ** cfg.ell
    process_term = phi_distance(cfg.phi, cfg.family, cfg.truth, data)
    return ReplicationRecord(n, r, seed, float(error), float(result.objective), float(process_term),
                             k_hat, determined)


def run_replications(cfg):
    """
    Every (n, r) replication of a study, ordered by (n, r)

    Replications run on cfg.threads worker threads; the output does not
    depend on the thread count
    """
    tasks = [(n, r) for n in cfg.n_grid for r in range(cfg.replications)]
    logger.info(f"Running {len(tasks)} replications over n={list(cfg.n_grid)}")
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
            return list(executor.map(lambda task: _replicate(cfg, *task), tasks))
    return [_replicate(cfg, n, r) for n, r in tasks]


def _aggregate(values, n, median):
    values = np.asarray(values, dtype=float)
    se = float(np.std(values, ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return dict(n=n, mean=float(values.mean()), se=se, reps=int(values.size),
                median=float(np.median(values)) if median else None)


def rows_from_records(records, median=False, with_order=False, true_k=None):
    """Aggregate replication records into one StudyRow per n"""
    rows = []
    for n in sorted({rec.n for rec in records}):
        group = [rec for rec in records if rec.n == n]
        stats = _aggregate([rec.error for rec in group], n, median)
        if with_order:
            # An undetermined order is never a correct selection
            stats['frac_correct'] = float(np.mean([rec.determined and rec.k_hat == true_k for rec in group]))
        rows.append(StudyRow(**stats))
        logger.info(f"n={n}: mean={stats['mean']:.6g} se={stats['se']:.6g}")
    return rows


def run_rate_study(cfg):
    """
    Mean and standard error of the Wasserstein error per n

    In plug-in mode the rows also carry the fraction of correctly selected orders
    """
    records = run_replications(cfg)
    return rows_from_records(records, cfg.median, cfg.plugin_mode, cfg.truth.k)


def run_order_study(cfg):
    """Fraction of replications selecting k(G*) per n, with mean W_1 of the plug-in fit"""
    if not cfg.plugin_mode:
        raise ConfigError("order studies need plug-in mode (no fixed k)")
    records = run_replications(replace(cfg, ell=1.0, power=False))
    return rows_from_records(records, cfg.median, True, cfg.truth.k)


def run_process_study(cfg):
    """
    Mean of the empirical-process term sup_phi |G* phi - tbar_phi| per n

    No fitting is done; the rows describe how fast the data-side term decays
    """
    def term(n, r):
        seed = mix_seed(cfg.seed, n, r)
        data = sample_mixture(cfg.family, cfg.truth, n, seed)
        return phi_distance(cfg.phi, cfg.family, cfg.truth, data)

    rows = []
    for n in cfg.n_grid:
        values = [term(n, r) for r in range(cfg.replications)]
        rows.append(StudyRow(**_aggregate(values, n, cfg.median)))
    return rows


def fit_log_log_slope(rows):
    """
    Ordinary least squares of log(mean) on log(n)

    Returns:
        SlopeFit(slope, intercept, stderr)
    """
    if len(rows) < 2:
        raise TooFewRows(f"a slope needs at least 2 rows, got {len(rows)}")
    means = np.array([row.mean for row in rows], dtype=float)
    if np.any(means <= 0):
        raise NonPositiveMean("log-log fits need positive means")
    ns = np.array([row.n for row in rows], dtype=float)
    result = linregress(np.log(ns), np.log(means))
    return SlopeFit(float(result.slope), float(result.intercept), float(result.stderr))


def write_csv(rows, path, median=False):
    """
    Header n,mean,se,reps,frac_correct (plus median when asked), 12 significant
    digits, UNIX newlines; missing frac_correct is written as an empty field
    """
    columns = config.CSV_COLUMNS + (['median'] if median else [])
    frame = pd.DataFrame([{col: getattr(row, col) for col in columns} for row in rows], columns=columns)
    for col in ('n', 'reps'):
        frame[col] = frame[col].astype('int64')
    frame.to_csv(path, index=False, float_format=f"%.{config.SIGNIFICANT_DIGITS}g",
                 na_rep='', lineterminator='\n')
    logger.info(f"Wrote {len(rows)} rows to {path}")


# ---------------------------------------------------------------------------
# Study config files
# ---------------------------------------------------------------------------

STUDY_KEYS = {
    'family', 'truth', 'phi', 'domain', 'n_grid', 'replications', 'k', 'k_max', 'mode',
    'ell', 'power', 'seed', 'restarts', 'max_iterations', 'c1', 'threads', 'median',
    'inject_truth',
}


def _flag(value, key):
    lowered = str(value).strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigError(f"{key} must be true or false, got '{value}'")


def _number(value, key, kind):
    text = str(value).strip()
    try:
        return int(text) if kind is int else float(text)
    except ValueError:
        noun = "an integer" if kind is int else "a number"
        raise ConfigError(f"{key} must be {noun}, got '{value}'") from None


def build_study_config(values):
    """
    Raw key -> string mapping (from a config file plus CLI flags) -> RateStudyConfig

    mode = plugin (or omitting k) selects plug-in mode; n_grid is a comma
    separated list; truth is a measure path or inline measure
    """
    unknown = set(values) - STUDY_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ('family', 'truth', 'phi', 'domain', 'n_grid'):
        if key not in values:
            raise ConfigError(f"missing config key '{key}'")

    mode = values.get('mode', 'known' if 'k' in values else 'plugin').strip().lower()
    if mode not in ('known', 'plugin'):
        raise ConfigError(f"mode must be known or plugin, got '{mode}'")
    if mode == 'known' and 'k' not in values:
        raise ConfigError("mode = known needs k")

    n_grid = tuple(_number(v, 'n_grid', int) for v in str(values['n_grid']).split(',') if v.strip())
    opts = OptimizerOptions(
        restarts=_number(values.get('restarts', config.RESTARTS), 'restarts', int),
        max_iterations=_number(values.get('max_iterations', config.MAX_ITERATIONS), 'max_iterations', int),
    )

    return RateStudyConfig(
        family=parse_family(values['family']),
        truth=read_measure(values['truth']),
        phi=parse_phi(values['phi']),
        domain=parse_domain(values['domain']),
        n_grid=n_grid,
        replications=_number(values.get('replications', 1), 'replications', int),
        k=_number(values['k'], 'k', int) if mode == 'known' else None,
        k_max=_number(values.get('k_max', 4), 'k_max', int),
        ell=_number(values.get('ell', 1.0), 'ell', float),
        power=_flag(values.get('power', 'false'), 'power'),
        seed=_number(values.get('seed', config.DEFAULT_SEED), 'seed', int),
        opts=opts,
        c1=_number(values['c1'], 'c1', float) if 'c1' in values else None,
        threads=_number(values.get('threads', 1), 'threads', int),
        median=_flag(values.get('median', 'false'), 'median'),
        inject_truth=_flag(values.get('inject_truth', 'false'), 'inject_truth'),
    )
