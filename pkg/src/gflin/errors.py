"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class GflinError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(GflinError, ValueError):
    """Invalid configuration, hyperparameter, or flag combination."""


class DataError(GflinError, ValueError):
    """Malformed, inconsistent, or out-of-range input data."""


class NumericalError(GflinError, ArithmeticError):
    """Numerical failure: non-finite values, factorization breakdown, divergence."""
