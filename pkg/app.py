"""
mixfit - minimum Phi-distance estimation for finite mixtures
Command-line entry point: data generation, fitting, order selection,
Monte Carlo studies, Wasserstein evaluation and scoring
"""

import argparse
import logging
import sys

from core.errors import ConfigError, MixfitError, NonPositiveMean, TooFewRows
from core.families import sample_mixture
from core.measures import wasserstein
from estimation.objectives import phi_distance
from estimation.optimizer import OptimizerOptions, fit
from estimation.order_selection import plug_in
from experiments.studies import (
    build_study_config,
    fit_log_log_slope,
    run_order_study,
    run_rate_study,
    write_csv,
)
from utils.file_io import read_config, read_data, read_measure, write_data, write_measure
from utils.formatting import format_measure, format_number
from utils.spec_validator import parse_domain, parse_family, parse_phi
from utils.visualizer import render_html_report, render_svg_plot
import config

logger = logging.getLogger(__name__)

# Built-in defaults; a --config file overrides these, explicit flags override both
DEFAULTS = {
    'seed': config.DEFAULT_SEED,
    'restarts': config.RESTARTS,
    'max_iterations': config.MAX_ITERATIONS,
    'k_max': 4,
    'ell': 1.0,
    'strict': False,
}

# Options every command needs before it can run
REQUIRED = {
    'gen': ['family', 'truth', 'n'],
    'fit': ['family', 'phi', 'data', 'k', 'domain'],
    'order': ['family', 'phi', 'data', 'domain'],
    'score': ['family', 'phi', 'data', 'measure'],
}

STUDY_COMMANDS = ('rate-study', 'order-study')


def _flag_value(text):
    lowered = str(text).strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigError(f"expected true or false, got '{text}'")


def _option(parser, *names, help_text, **kwargs):
    """add_argument with default None so file values can fill in; the help shows the real default"""
    dest = names[-1].lstrip('-').replace('-', '_')
    default = DEFAULTS.get(dest)
    shown = f" (default: {default})" if default is not None else ""
    parser.add_argument(*names, default=None, help=help_text + shown, **kwargs)


def _add_model_options(parser):
    _option(parser, '--family', help_text="kernel family, e.g. gaussian(sigma=1.0,d=1), poisson, gamma(alpha=2.0)")
    _option(parser, '--phi', help_text="test-function class: ks, mmd(rbf,gamma=1.0), moments(order=3,theta0=0)")
    _option(parser, '--data', help_text="data file, one observation per line")


def _add_search_options(parser):
    _option(parser, '--domain', help_text="parameter box lo:hi[,lo:hi...]")
    _option(parser, '--restarts', type=int, help_text="Nelder-Mead starts per fit")
    _option(parser, '--max-iterations', type=int, help_text="iterations per start")
    _option(parser, '--seed', type=int, help_text="master seed (env MIXFIT_SEED)")
    _option(parser, '--out', help_text="write the fitted measure here instead of stdout")
    _option(parser, '--config', help_text="flat key = value file with option values")


def build_parser():
    """
    Create the argument parser with one subcommand per operation

    Returns:
        argparse.ArgumentParser
    """
    parser = argparse.ArgumentParser(prog='mixfit', description=__doc__.strip().splitlines()[0])
    parser.add_argument('--log-level', default=config.LOG_LEVEL,
                        help=f"logging level (default: {config.LOG_LEVEL}, env MIXFIT_LOG_LEVEL)")
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen', help="draw a sample from a mixture")
    _option(gen, '--family', help_text="kernel family")
    _option(gen, '--truth', help_text="measure file or inline measure '0.5 -1; 0.5 1'")
    _option(gen, '-n', type=int, help_text="number of observations")
    _option(gen, '--seed', type=int, help_text="seed of the sample (env MIXFIT_SEED)")
    _option(gen, '--out', help_text="data file to write instead of stdout")
    _option(gen, '--config', help_text="flat key = value file with option values")

    fit_cmd = commands.add_parser('fit', help="minimum Phi-distance fit with k atoms")
    _add_model_options(fit_cmd)
    _option(fit_cmd, '-k', type=int, help_text="number of atoms")
    _add_search_options(fit_cmd)
    _option(fit_cmd, '--strict', action='store_true', help_text="exit 4 when the best start did not converge")

    order = commands.add_parser('order', help="estimate the number of components")
    _add_model_options(order)
    _option(order, '--k-max', type=int, help_text="largest order tried")
    _option(order, '--c1', type=float, help_text="threshold constant (default depends on phi)")
    _add_search_options(order)

    for name, runner_help in (('rate-study', "Wasserstein convergence-rate study"),
                              ('order-study', "order-selection frequency study")):
        study = commands.add_parser(name, help=runner_help)
        _option(study, '--config', help_text="study config file (flat key = value)")
        _option(study, '--csv', help_text="CSV output path")
        _option(study, '--svg', help_text="SVG plot output path")
        _option(study, '--html', help_text="interactive HTML report path")
        _option(study, '--seed', type=int, help_text="master seed, overrides the file")
        _option(study, '--replications', type=int, help_text="replications per n, overrides the file")
        study.add_argument('--threads', type=int, default=None,
                           help=f"worker threads (default: {config.DEFAULT_THREADS}, env MIXFIT_THREADS)")

    wass = commands.add_parser('wasserstein', help="exact Wasserstein distance between two measures")
    wass.add_argument('measure_a', help="measure file or inline measure")
    wass.add_argument('measure_b', help="measure file or inline measure")
    _option(wass, '--ell', type=float, help_text="order of the distance")

    score = commands.add_parser('score', help="Phi-distance of a measure against data")
    _add_model_options(score)
    _option(score, '--measure', help_text="measure file or inline measure")
    _option(score, '--config', help_text="flat key = value file with option values")

    parser.commands = dict(commands.choices)
    return parser


def _resolve(args, parser):
    """Fill unset options from --config, then from DEFAULTS; unknown file keys are errors"""
    if args.command in STUDY_COMMANDS:
        # Their --config is the study file, read by build_study_config
        return args
    subparser = parser.commands[args.command]
    actions = {a.dest: a for a in subparser._actions if a.dest not in ('help', 'config')}
    overlay = read_config(args.config) if getattr(args, 'config', None) else {}
    unknown = set(overlay) - set(actions)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    for dest, action in actions.items():
        if getattr(args, dest, None) is not None:
            continue
        if dest in overlay:
            raw = overlay[dest]
            if isinstance(action, argparse._StoreTrueAction):
                value = _flag_value(raw)
            else:
                try:
                    value = action.type(raw) if action.type else raw
                except ValueError:
                    raise ConfigError(f"bad value for {dest}: '{raw}'") from None
        else:
            value = DEFAULTS.get(dest)
        setattr(args, dest, value)

    missing = [name for name in REQUIRED.get(args.command, []) if getattr(args, name) is None]
    if missing:
        raise ConfigError(f"missing option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
    return args


def _options(args):
    return OptimizerOptions(restarts=args.restarts, max_iterations=args.max_iterations, seed=args.seed)


def _emit_measure(G, out):
    if out:
        write_measure(G, out)
    else:
        sys.stdout.write(format_measure(G))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen(args):
    fam = parse_family(args.family)
    truth = read_measure(args.truth)
    data = sample_mixture(fam, truth, args.n, args.seed)
    write_data(data, args.out or sys.stdout, fam)
    return config.EXIT_OK


def cmd_fit(args):
    fam = parse_family(args.family)
    phi = parse_phi(args.phi)
    domain = parse_domain(args.domain)
    data = read_data(args.data, fam)

    result = fit(fam, phi, data, args.k, domain, _options(args))
    print(f"k={result.measure.k} objective={format_number(result.objective)} "
          f"converged={str(result.converged).lower()}")
    _emit_measure(result.measure, args.out)
    if args.strict and not result.converged:
        print("error: best start did not converge", file=sys.stderr)
        return config.EXIT_NOT_CONVERGED
    return config.EXIT_OK


def cmd_order(args):
    fam = parse_family(args.family)
    phi = parse_phi(args.phi)
    domain = parse_domain(args.domain)
    data = read_data(args.data, fam)

    result = plug_in(fam, phi, data, args.k_max, domain, _options(args), args.c1)
    print(f"k_hat={result.k_hat if result.determined else 'undetermined'}")
    print(f"threshold={format_number(result.threshold)}")
    for ell, value in enumerate(result.objectives, start=1):
        print(f"objective[{ell}]={format_number(value)}")
    _emit_measure(result.plug_in.measure, args.out)
    return config.EXIT_OK


def _study_values(args):
    if not args.config:
        raise ConfigError("studies need --config")
    values = read_config(args.config)
    for key in ('seed', 'replications', 'threads'):
        if getattr(args, key) is not None:
            values[key] = str(getattr(args, key))
    values.setdefault('threads', str(config.DEFAULT_THREADS))
    return values


def cmd_rate_study(args):
    cfg = build_study_config(_study_values(args))
    rows = run_rate_study(cfg)
    for row in rows:
        print(f"n={row.n} mean={format_number(row.mean)} se={format_number(row.se)}")
    if args.csv:
        write_csv(rows, args.csv, median=cfg.median)
    slope_fit = fit_log_log_slope(rows)
    if args.svg:
        render_svg_plot(rows, slope_fit, args.svg)
    if args.html:
        render_html_report(rows, slope_fit, args.html)
    print(f"slope={format_number(slope_fit.slope)} stderr={format_number(slope_fit.stderr)}")
    return config.EXIT_OK


def cmd_order_study(args):
    cfg = build_study_config(_study_values(args))
    rows = run_order_study(cfg)
    for row in rows:
        print(f"n={row.n} frac_correct={format_number(row.frac_correct)} mean={format_number(row.mean)}")
    if args.csv:
        write_csv(rows, args.csv, median=cfg.median)
    slope_fit = fit_log_log_slope(rows) if len(rows) > 1 and all(r.mean > 0 for r in rows) else None
    if args.svg:
        render_svg_plot(rows, slope_fit, args.svg, ylabel="mean W1")
    if args.html:
        render_html_report(rows, slope_fit, args.html)
    return config.EXIT_OK


def cmd_wasserstein(args):
    G = read_measure(args.measure_a)
    H = read_measure(args.measure_b)
    print(format_number(wasserstein(G, H, args.ell)))
    return config.EXIT_OK


def cmd_score(args):
    fam = parse_family(args.family)
    phi = parse_phi(args.phi)
    data = read_data(args.data, fam)
    G = read_measure(args.measure)
    print(f"objective={format_number(phi_distance(phi, fam, G, data))}")
    return config.EXIT_OK


COMMANDS = {
    'gen': cmd_gen,
    'fit': cmd_fit,
    'order': cmd_order,
    'rate-study': cmd_rate_study,
    'order-study': cmd_order_study,
    'wasserstein': cmd_wasserstein,
    'score': cmd_score,
}


def main(argv=None):
    """
    Run one command and return its exit code

    0 success, 2 validation, 3 IO, 4 strict non-convergence, 5 study shape
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')

    try:
        _resolve(args, parser)
        return COMMANDS[args.command](args)
    except (TooFewRows, NonPositiveMean) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return config.EXIT_STUDY_SHAPE
    except (MixfitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return config.EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return config.EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
