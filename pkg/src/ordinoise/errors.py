"""Exception types shared across the package.

Everything derives from ValueError so callers that don't care about the
distinction can still catch broadly.
"""


class InvalidClassError(ValueError):
    """A class index fell outside the 1..C range, or the class set has gaps."""


class InvalidParameterError(ValueError):
    """A numeric parameter violated its documented range."""


class ShapeError(ValueError):
    """Array dimensions do not line up."""


class EmptyBatchError(ValueError):
    """An operation that needs at least one sample received none."""


class NumericError(ValueError):
    """Non-finite values where finite numbers are required."""


class InfeasibleMatrixError(ValueError):
    """Requested noise strength cannot produce a row-stochastic matrix."""


class CsvParseError(ValueError):
    """A dataset CSV row could not be parsed; message carries the line number."""


class StratificationError(ValueError):
    """A class has too few samples to be spread over the requested folds."""


class UndefinedMetricError(ValueError):
    """The metric has no value for this input (e.g. precision of an empty selection)."""


class EmptyTraceError(ValueError):
    """A run trace with no epoch records cannot be summarized."""


class ConfigError(ValueError):
    """Experiment configuration failed validation."""
