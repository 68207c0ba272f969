"""Exception hierarchy shared by every module of the package."""


class LassoSigError(Exception):
    """Base class for all package errors."""


class DimensionError(LassoSigError, ValueError):
    """Shapes of the design, response or coefficient vector do not agree."""


class ConvergenceError(LassoSigError, RuntimeError):
    """An iterative solver exhausted its budget before certifying optimality."""


class SingularDesignError(LassoSigError, ValueError):
    """A least-squares or Gram system is rank deficient.

    The offending column set is stored on ``columns``.
    """

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(int(c) for c in columns)


class DegenerateFitError(LassoSigError, RuntimeError):
    """A noise-level estimate collapsed to (numerically) zero."""


class PathRangeError(LassoSigError, ValueError):
    """A quantity was requested beyond the computed extent of a truncated path."""

    def __init__(self, message, available_steps=()):
        super().__init__(message)
        self.available_steps = tuple(available_steps)


class IdentityMismatchError(LassoSigError, ArithmeticError):
    """Two algebraically equal forms of a statistic disagree (broken solver)."""


class ConfigError(LassoSigError, ValueError):
    """A scenario or inference configuration is invalid."""


class InputFormatError(LassoSigError, ValueError):
    """A delimited input file could not be parsed; ``line`` is 1-based."""

    def __init__(self, message, path=None, line=None):
        where = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(where + message)
        self.path = path
        self.line = line
