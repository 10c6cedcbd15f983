"""Exception hierarchy shared by every module of the package."""


class TripartiteError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(TripartiteError, ValueError):
    """An input is out of range, non-finite or otherwise inconsistent."""


class UndefinedCorrelationError(TripartiteError, ArithmeticError):
    """A correlation or noise-reduction ratio has a vanishing denominator."""


class OverSubtractionError(TripartiteError, ArithmeticError):
    """Dark-run subtraction left a non-positive variance or mean."""


class ConfigError(TripartiteError, ValueError):
    """A run or scan configuration failed validation."""


class ConvergenceError(TripartiteError, RuntimeError):
    """An iterative routine hit its iteration cap."""
