"""Exception hierarchy shared by every lagflow module."""

from __future__ import annotations


class LagflowError(Exception):
    """Base class for all errors raised by lagflow."""


class ConfigurationError(LagflowError, ValueError):
    """Bad grid, mask, step size or run configuration."""


class ContractViolation(LagflowError, ValueError):
    """An input violates a documented precondition (e.g. asymmetric matrix)."""


class RangeError(LagflowError, IndexError):
    """A requested time index or time value is not available."""


class HypothesisError(LagflowError, ValueError):
    """The hypotheses of an estimate do not hold for the given constants."""


class DivergenceError(LagflowError, FloatingPointError):
    """Non-finite values appeared while time stepping.

    ``partial`` holds the trajectory computed up to the last finite state
    when the error is raised from :func:`lagflow.flow.evolve`.
    """

    def __init__(self, message, node=None, time=None, partial=None):
        super().__init__(message)
        self.node = node
        self.time = time
        self.partial = partial


class SolverError(LagflowError, RuntimeError):
    """Newton iteration failed; ``residual_history`` lists max-norm residuals."""

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class CoverageError(LagflowError, ValueError):
    """A rescaled node maps outside the source trajectory."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class FitError(LagflowError, ValueError):
    """Least-squares quadratic fit is rank deficient."""


class LoadError(LagflowError, OSError):
    """Base class for trajectory persistence failures."""


class ChecksumError(LoadError):
    pass


class FormatVersionError(LoadError):
    pass


class TruncatedFileError(LoadError):
    def __init__(self, message, filename=None):
        super().__init__(message)
        self.filename = filename
