"""Exception types shared across the package."""


class HeterlossError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(HeterlossError, ValueError):
    """Array dimensions do not line up."""


class InputError(HeterlossError, ValueError):
    """Input data violates a precondition (non-finite, empty, mismatched lengths)."""


class StateError(HeterlossError, RuntimeError):
    """Objects passed together do not belong together (e.g. cache from another network)."""


class ConfigError(HeterlossError, ValueError):
    """Invalid configuration value."""


class DomainError(HeterlossError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class DegenerateError(HeterlossError, ValueError):
    """Statistic is undefined for the given data (e.g. zero variance)."""


class NumericError(HeterlossError, ArithmeticError):
    """A computation produced non-finite values."""
