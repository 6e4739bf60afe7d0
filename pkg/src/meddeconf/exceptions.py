"""Exception types raised across the package."""


class DeconfounderError(Exception):
    """Base class for all package errors."""


class CohortValidationError(DeconfounderError, ValueError):
    pass


class DimensionMismatchError(CohortValidationError):
    def __init__(self, field, expected, got):
        self.field = field
        super().__init__(f"dimension mismatch in {field!r}: expected {expected}, got {got}")


class NonBinaryEntryError(CohortValidationError):
    pass


class IngestError(DeconfounderError, ValueError):
    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = [str(path)] if path is not None else []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class InvalidHyperparameterError(DeconfounderError, ValueError):
    pass


class DegenerateDataError(DeconfounderError, ValueError):
    pass


class DivergenceError(DeconfounderError, FloatingPointError):
    pass


class ConfigurationError(DeconfounderError, ValueError):
    pass


class CheckFailedError(DeconfounderError):
    """Predictive check rejected the factor model."""

    def __init__(self, score, band):
        self.score = score
        self.band = band
        super().__init__(
            f"predictive check failed: score {score:.3f} outside band [{band[0]}, {band[1]}]"
        )
