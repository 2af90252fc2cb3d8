"""Exception hierarchy shared across the engine.

The CLI maps these onto its documented exit codes: InputError -> 2,
ParameterError -> 3, ConsistencyError/DimensionError -> 4, DataError -> 5.
"""


class QcsError(Exception):
    """Base class for all engine errors."""


class InputError(QcsError):
    """Malformed or non-finite input values / files."""


class ParameterError(QcsError):
    """Invalid configuration parameter (bad Q, step <= 0, zero dims, ...)."""


class DimensionError(QcsError):
    """Shape mismatch between operands."""


class ConsistencyError(QcsError):
    """Mutually inconsistent metadata between files or records."""


class DataError(QcsError):
    """Missing or empty data (e.g. empty training directory)."""


class DegenerateScaleError(ParameterError):
    """Effective scale is zero somewhere: the smoothed likelihood does not exist."""


class StabilityError(ParameterError):
    """Spectral transition parameter violates |A| <= 1."""
