"""Exception hierarchy shared by every module of the package."""


class DoubleRisError(Exception):
    """Base class for all package errors."""


class ConfigError(DoubleRisError, ValueError):
    """Invalid scenario, geometry or dimension settings."""

    def __init__(self, message, field=None, line=None):
        self.message = message
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)


class MatrixError(DoubleRisError, ValueError):
    """A matrix violates a structural requirement (PSD, shape, Hermitian)."""

    def __init__(self, message, name=None):
        self.name = name
        super().__init__(f"{name}: {message}" if name else message)


class NumericalError(DoubleRisError, ArithmeticError):
    """Quadrature, log-det or similar numerical evaluation failed."""


class ConvergenceError(DoubleRisError, RuntimeError):
    """An iterative procedure hit its iteration budget.

    ``residuals`` holds the last residual vector (or rate trace) so the caller
    can inspect how far from convergence the iteration stopped.
    """

    def __init__(self, message, residuals=None, trace=None):
        self.residuals = residuals
        self.trace = trace
        super().__init__(message)


class DivergenceError(ConvergenceError):
    """The fixed-point iteration produced NaN or Inf."""


class DegenerateError(DoubleRisError, ValueError):
    """No usable eigenmode (e.g. water-filling on a zero matrix)."""
