"""Exception types raised across the package."""


class StringPredError(Exception):
    """Base class for all package errors."""


class ParseError(StringPredError, ValueError):
    """Malformed input record."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(StringPredError, ValueError):
    """A value violates a domain invariant (e.g. ask < bid)."""


class ParameterError(StringPredError, ValueError):
    """Invalid parameter or parameter combination."""


class BoundsError(StringPredError, IndexError):
    """A requested window does not fit inside the series."""


class ZeroPriceError(StringPredError, ZeroDivisionError):
    """A price used as a divisor is zero."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"zero price at index {index}")


class DegenerateWindowError(StringPredError, ValueError):
    """Window has max == min and cannot be standardized."""


class FlatPriceError(StringPredError, ZeroDivisionError):
    """The simple invariant predictor needs p_t != p_{t-1}."""


class MetricError(StringPredError, ValueError):
    """A metric is undefined for the given inputs."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)


class UndefinedStatisticError(StringPredError, ValueError):
    """Sharpe or skewness undefined (too few samples or zero variance)."""


class AlignmentError(StringPredError, IndexError):
    """Signal index outside the tick stream."""


class NoCandidateError(StringPredError, LookupError):
    """No admissible grid result to select from."""
