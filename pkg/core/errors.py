"""
Errors - exception hierarchy for mixfit
Every validation failure raised by the library derives from MixfitError,
so callers (and the CLI) can catch one type
"""


class MixfitError(ValueError):
    """Base class for all mixfit validation errors"""


# Mixing measures and parameter boxes
class InvalidDomain(MixfitError):
    pass


class NonPositiveWeight(MixfitError):
    pass


class WeightSumNotOne(MixfitError):
    pass


class AtomOutsideDomain(MixfitError):
    pass


class DimensionMismatch(MixfitError):
    pass


class ZeroScale(MixfitError):
    pass


# Kernel families
class ParameterOutOfDomain(MixfitError):
    pass


class SupportViolation(MixfitError):
    pass


class AtomOutOfKernelDomain(MixfitError):
    pass


class UnsupportedFamily(MixfitError):
    pass


class UnsupportedOrder(MixfitError):
    pass


class Theta0OutOfDomain(MixfitError):
    pass


# Objectives and estimators
class EmptyData(MixfitError):
    pass


class UnsupportedDimension(MixfitError):
    pass


class LengthMismatch(MixfitError):
    pass


class IncompatiblePhiFamily(MixfitError):
    pass


class NonFiniteObjectiveAtInit(MixfitError):
    pass


# Order selection
class EmptyFitList(MixfitError):
    pass


class NTooSmall(MixfitError):
    pass


class InvalidThreshold(MixfitError):
    pass


class KTooSmall(MixfitError):
    pass


# Experiments
class NonPositiveMean(MixfitError):
    pass


class TooFewRows(MixfitError):
    pass


# Parsing and configuration
class InvalidSpec(MixfitError):
    pass


class ConfigError(MixfitError):
    pass
