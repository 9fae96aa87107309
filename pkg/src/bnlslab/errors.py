"""Exception types raised across the package."""


class BNLSError(Exception):
    """Base class for all package errors."""


class GridError(BNLSError, ValueError):
    """Invalid grid parameters."""


class InvalidDimensionError(GridError):
    pass


class NonPowerOfTwoError(GridError):
    pass


class NonPositiveLengthError(GridError):
    pass


class GridMismatchError(BNLSError, ValueError):
    """Two fields that must share a grid do not."""


class NonFiniteError(BNLSError, ValueError):
    """NaN or Inf encountered in a field."""


class ZeroFieldError(BNLSError, ValueError):
    """A functional that is undefined at u = 0 was given u = 0."""


class RegimeError(BNLSError, ValueError):
    """Parameters are outside the regime an operation is defined for."""


class DilationRangeError(BNLSError, ValueError):
    pass


class SnapshotError(BNLSError, IOError):
    """Malformed snapshot file."""


class BadMagicError(SnapshotError):
    pass


class VersionMismatchError(SnapshotError):
    pass


class TruncatedPayloadError(SnapshotError):
    pass


class SolverError(BNLSError, RuntimeError):
    """A solver could not produce a usable answer."""


class NotConvergedError(SolverError):
    pass


class RootFindingError(SolverError):
    """f_k never dips below m0, or a bracket is invalid."""


class BracketError(SolverError):
    pass


class ConfigError(BNLSError, ValueError):
    """Malformed or inconsistent experiment configuration."""
