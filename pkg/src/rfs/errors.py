"""Exception types shared across the package."""


class RfsError(Exception):
    """Base class for all package errors."""


class ConfigError(RfsError):
    """Invalid configuration or hyperparameters (CLI exit code 2)."""


class DataError(RfsError):
    """Problem with input data: missing columns, unparseable cells (exit code 3)."""


class MissingColumnError(DataError):
    """A column named in the schema is absent from the file."""


class UndefinedMetricError(RfsError):
    """A metric's defining denominator is empty (single-class labels, empty subgroup)."""


class SolverError(RfsError):
    """Conic solve did not return a usable optimum (exit code 4)."""
