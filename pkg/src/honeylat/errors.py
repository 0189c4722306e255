"""Exception types. Each carries the CLI exit code it maps to."""


class HoneylatError(Exception):
    exit_code = 3


class InvalidArgument(HoneylatError, ValueError):
    exit_code = 2


class ConfigError(HoneylatError):
    exit_code = 2


class NumericFailure(HoneylatError, RuntimeError):
    exit_code = 3


class NotADiracPoint(NumericFailure):
    pass


class AmbiguousMultiplicity(NumericFailure):
    pass


class NotConical(NumericFailure):
    pass


class SymmetryViolation(NumericFailure):
    pass


class RootNotFound(NumericFailure):
    pass


class ProjectionError(NumericFailure):
    pass


class DegenerateCoupling(NumericFailure):
    pass


class PrecisionLoss(NumericFailure):
    pass


class FlatBand(NumericFailure):
    pass
