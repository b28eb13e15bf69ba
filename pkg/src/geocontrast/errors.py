"""Exception hierarchy shared across the package."""


class GeoContrastError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(GeoContrastError, ValueError):
    """An argument violated a documented precondition."""


class ContractViolationError(GeoContrastError, RuntimeError):
    """An internal invariant that callers must uphold was broken."""


class DatasetFormatError(GeoContrastError, ValueError):
    """A persisted dataset file is malformed."""


class ConfigError(GeoContrastError, ValueError):
    """A configuration file or key is invalid."""


class NonFiniteGradientError(GeoContrastError, RuntimeError):
    """Training produced a NaN or infinite gradient."""
