"""Exception types raised across the package."""


class TemporalReconError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(TemporalReconError, ValueError):
    pass


class IndexOutOfRange(TemporalReconError, IndexError):
    pass


class EmptyAggregate(TemporalReconError, ValueError):
    """Fewer observations than one aggregation window."""


class InvalidHierarchy(TemporalReconError, ValueError):
    pass


class NonStationaryModel(TemporalReconError, ValueError):
    """AR roots on/inside the unit circle or MA roots non-invertible."""


class InvalidPacf(TemporalReconError, ValueError):
    pass


class InsufficientData(TemporalReconError, ValueError):
    pass


class InsufficientHistory(TemporalReconError, ValueError):
    pass


class DegenerateSeries(TemporalReconError, ValueError):
    """Series with zero residual variance under the requested model."""


class OptimizerFailure(TemporalReconError, RuntimeError):
    pass


class AllFitsFailed(TemporalReconError, RuntimeError):
    pass


class NoInvertibleRoot(TemporalReconError, ArithmeticError):
    pass


class SingularCovariance(TemporalReconError, ArithmeticError):
    pass


class DegenerateVariance(TemporalReconError, ValueError):
    pass


class InsufficientResiduals(TemporalReconError, ValueError):
    pass


class ZeroBaseError(TemporalReconError, ZeroDivisionError):
    """Base forecasts are perfect, so relative errors are undefined."""


class UnsupportedModel(TemporalReconError, ValueError):
    pass


class ConfigError(TemporalReconError, ValueError):
    pass


class ParseError(TemporalReconError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class FrequencyMismatch(TemporalReconError, ValueError):
    pass
