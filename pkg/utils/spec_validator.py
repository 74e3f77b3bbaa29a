"""
Spec Validator - parse family, Phi, measure and domain strings
Cleans user input and rejects malformed specs with a message naming the
offending token
"""

import re

import numpy as np

from core.errors import InvalidSpec
from core.families import Binomial, Gamma, GaussianLocation, NegativeBinomial, Poisson
from core.measures import ParamDomain, make_measure
from estimation.objectives import KS, MMD, GaussianRBF, Laplace, Moments

_CALL = re.compile(r'^([a-z_]+)(?:\((.*)\))?$')

FAMILIES = {
    'gaussian': (GaussianLocation, {'sigma': float, 'd': int}),
    'poisson': (Poisson, {}),
    'gamma': (Gamma, {'alpha': float}),
    'binomial': (Binomial, {'m': int}),
    'negbinomial': (NegativeBinomial, {'r': float}),
}

RKHS_KERNELS = {
    'rbf': (GaussianRBF, {'gamma': float}),
    'laplace': (Laplace, {'scale': float}),
}


def clean_spec(text):
    """
    Normalize a spec string: lowercase, no whitespace

    Args:
        text: raw spec as typed on the command line or in a config file

    Returns:
        str: cleaned spec
    """
    if not isinstance(text, str) or not text.strip():
        raise InvalidSpec("empty spec")
    return ''.join(text.lower().split())


def _split_call(text):
    match = _CALL.match(text)
    if not match:
        raise InvalidSpec(f"cannot parse '{text}'")
    name, body = match.groups()
    args = [a for a in body.split(',')] if body else []
    if any(a == '' for a in args):
        raise InvalidSpec(f"empty argument in '{text}'")
    return name, args


def _keyword_args(args, allowed, context):
    """key=value tokens -> dict of converted values; unknown or repeated keys are errors"""
    values = {}
    for token in args:
        if '=' not in token:
            raise InvalidSpec(f"expected key=value in {context}, got '{token}'")
        key, raw = token.split('=', 1)
        if key not in allowed:
            raise InvalidSpec(f"unknown argument '{key}' in {context}")
        if key in values:
            raise InvalidSpec(f"repeated argument '{key}' in {context}")
        try:
            number = float(raw)
        except ValueError:
            raise InvalidSpec(f"'{raw}' is not a number in {context}") from None
        if allowed[key] is int:
            if number != int(number):
                raise InvalidSpec(f"'{raw}' must be an integer in {context}")
            number = int(number)
        values[key] = number
    return values


def parse_family(text):
    """
    Family spec -> KernelFamily

    Accepts gaussian(sigma=1.0,d=1), poisson, gamma(alpha=2.0),
    binomial(m=10), negbinomial(r=3.0); case- and whitespace-insensitive
    """
    cleaned = clean_spec(text)
    name, args = _split_call(cleaned)
    if name not in FAMILIES:
        raise InvalidSpec(f"unknown family '{name}'")
    cls, allowed = FAMILIES[name]
    return cls(**_keyword_args(args, allowed, name))


def parse_phi(text):
    """
    Phi spec -> KS, MMD or Moments

    Accepts ks, mmd(rbf,gamma=1.0), mmd(laplace,scale=1.0),
    moments(order=3,theta0=0)
    """
    cleaned = clean_spec(text)
    name, args = _split_call(cleaned)

    if name == 'ks':
        if args:
            raise InvalidSpec(f"ks takes no arguments, got '{cleaned}'")
        return KS()

    if name == 'mmd':
        if not args:
            return MMD()
        kernel_name, rest = args[0], args[1:]
        if kernel_name not in RKHS_KERNELS:
            raise InvalidSpec(f"unknown kernel '{kernel_name}'")
        cls, allowed = RKHS_KERNELS[kernel_name]
        return MMD(cls(**_keyword_args(rest, allowed, kernel_name)))

    if name == 'moments':
        return Moments(**_keyword_args(args, {'order': int, 'theta0': float}, 'moments'))

    raise InvalidSpec(f"unknown test-function class '{name}'")


def parse_domain(text):
    """
    'lo:hi[,lo:hi...]' -> ParamDomain
    """
    cleaned = clean_spec(text)
    lower, upper = [], []
    for token in cleaned.split(','):
        parts = token.split(':')
        if len(parts) != 2:
            raise InvalidSpec(f"expected lo:hi, got '{token}'")
        try:
            lower.append(float(parts[0]))
            upper.append(float(parts[1]))
        except ValueError:
            raise InvalidSpec(f"non-numeric interval '{token}'") from None
    return ParamDomain(tuple(lower), tuple(upper))


def parse_measure_lines(lines):
    """
    Measure text lines 'p theta_1 ... theta_q' -> MixingMeasure

    Blank lines and '#' comments are skipped
    """
    weights, atoms = [], []
    for line in lines:
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) < 2:
            raise InvalidSpec(f"measure line needs a weight and an atom, got '{line}'")
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise InvalidSpec(f"non-numeric field in measure line '{line}'") from None
        weights.append(values[0])
        atoms.append(values[1:])
    if not weights:
        raise InvalidSpec("measure has no atoms")
    if len({len(a) for a in atoms}) != 1:
        raise InvalidSpec("measure atoms have different lengths")
    return make_measure(np.array(atoms), np.array(weights))


def parse_inline_measure(text):
    """'0.5 -1; 0.5 1' -> MixingMeasure (atoms separated by ';')"""
    return parse_measure_lines(text.split(';'))


def looks_inline(text):
    """True when text is an inline measure rather than a path"""
    return ';' in text or bool(re.match(r'^\s*[-+0-9.eE]+(\s+[-+0-9.eE]+)+\s*$', text))
