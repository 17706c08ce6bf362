"""Exception hierarchy shared across the package.

Each top-level family maps onto one CLI exit code (see cli.EXIT_CODES):
configuration problems, numeric failures (tolerances, escapes), search
failures (nothing found within a stated budget), and exhausted precision.
"""


class NlsCascadeError(Exception):
    """Base class for all package errors."""


class ConfigError(NlsCascadeError):
    """Invalid configuration, invalid input object, or violated precondition."""


class NumericError(NlsCascadeError):
    """A numeric tolerance could not be met or an iterate left its safe region."""


class ToleranceUnmetError(NumericError):
    """An integrator or root finder failed to reach the requested tolerance."""


class BallEscapeError(NumericError):
    """A flow left the analyticity/smallness ball it was certified on."""


class SupportEscapeError(NumericError):
    """A state needed a mode outside the truncation region."""


class SearchError(NlsCascadeError):
    """An explicit search exhausted its budget without a witness."""


class ResonantQuartetError(NlsCascadeError):
    """A denominator that must be nonzero vanished exactly."""


class PrecisionExhaustedError(NlsCascadeError):
    """Certified interval arithmetic could not separate the quantities needed."""
