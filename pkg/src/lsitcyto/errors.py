"""Exception types raised across the package."""


class LsitError(Exception):
    """Base class for all package errors."""


class DimensionError(LsitError, ValueError):
    pass


class ParameterError(LsitError, ValueError):
    pass


class NumericError(LsitError, ArithmeticError):
    pass


class CapacityError(LsitError, ValueError):
    pass


class DataError(LsitError, ValueError):
    pass


class StateError(LsitError, RuntimeError):
    pass


class StructureError(LsitError, ValueError):
    pass


class UndefinedReferenceError(LsitError, ValueError):
    """Raised when an SNR reference signal carries no energy."""
