"""Exception hierarchy.

Validation problems (bad parameters, malformed inputs) derive from
:class:`ValidationError`; numerical dead ends that arise from valid inputs
derive from :class:`NumericError`. The CLI maps the two families onto exit
codes 1 and 2.
"""


class SelfNormError(Exception):
    """Base class for all package errors."""


class ValidationError(SelfNormError, ValueError):
    """Input violates a documented precondition."""


class InvalidPlanError(ValidationError):
    pass


class SeriesLengthError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class StructureError(ValidationError):
    """Transition matrix is not a valid irreducible stochastic matrix."""


class PreconditionError(ValidationError):
    pass


class ProfileError(ValidationError):
    """A mixing profile lacks a coefficient that was asked for."""


class IntervalParseError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class NumericError(SelfNormError, ArithmeticError):
    """Computation is undefined for otherwise valid inputs."""


class DegenerateDenominatorError(NumericError):
    """Self-normalizing denominator is exactly zero."""


class PrecisionError(NumericError):
    """Exact expansion terminated before the requested depth."""
