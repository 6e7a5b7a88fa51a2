"""Exception types raised across the package.

Everything derives from CostsenseError so callers can catch the whole
family with one clause; the CLI maps these to a nonzero exit code and a
machine-readable error line.
"""


class CostsenseError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(CostsenseError):
    """Array has the wrong shape, or two arguments disagree in dimension."""


class PositivityViolation(CostsenseError):
    """A matrix entry violates its positivity (or non-negativity) domain."""


class RangeViolation(CostsenseError):
    """A value falls outside its permitted interval."""


class UtilityBoundError(CostsenseError):
    """A diagonal (correct-classification) cost exceeds its column mean."""


class NumericError(CostsenseError):
    """NaN or infinity where a finite value is required."""


class StateError(CostsenseError):
    """Operation applied to objects that do not belong together."""


class PreconditionError(CostsenseError):
    """An operation's stated hypothesis does not hold for the inputs."""


class ConvergenceError(CostsenseError):
    """Iterative solver exhausted its budget before reaching tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ParseError(CostsenseError):
    """Malformed input file; message carries the offending location."""


class ConfigError(CostsenseError):
    """Invalid or inconsistent configuration."""


class ProtocolError(CostsenseError):
    """Dataset split/imbalance protocol cannot be satisfied."""


class SamplingError(CostsenseError):
    """Resampling operation cannot be performed on the given dataset."""
