"""Exception hierarchy shared by the library and the CLI."""


class InfoflowError(Exception):
    """Base class for all package errors."""


class DataError(InfoflowError, ValueError):
    """Input data is malformed, incomplete or too short for the request."""


class ConfigError(InfoflowError, ValueError):
    """A run configuration or synthetic spec is invalid."""


class DegenerateDesignError(InfoflowError, ArithmeticError):
    """A regression design matrix is rank deficient (e.g. a constant series)."""
