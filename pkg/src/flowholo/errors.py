"""Exception hierarchy shared across the package."""


class FlowHoloError(Exception):
    """Base class for all package errors."""


class DomainError(FlowHoloError, ValueError):
    """An argument lies outside the domain of an operation."""


class BandEdgeError(DomainError):
    """Density of states evaluated at or beyond the band edge."""


class ConfigurationError(FlowHoloError, ValueError):
    """Inconsistent inputs (mismatched grids, dimensions, unknown keys)."""


class UnsupportedModelError(FlowHoloError, ValueError):
    """The requested routine is not exact for the given model."""


class ConvergenceError(FlowHoloError, ArithmeticError):
    """A quadrature did not reach its tolerance within its budget.

    Attributes
    ----------
    partial : float
        Best value available when the budget ran out.
    error_estimate : float
        Error estimate attached to ``partial``.
    """

    def __init__(self, message, partial=float("nan"), error_estimate=float("inf")):
        super().__init__(message)
        self.partial = partial
        self.error_estimate = error_estimate


class PoleError(FlowHoloError, ZeroDivisionError):
    """An integrand was evaluated exactly on a non-integrable pole."""


class StiffnessError(FlowHoloError, ArithmeticError):
    """The ODE integrator could not advance (step-size underflow)."""

    def __init__(self, message, b_reached):
        super().__init__(message)
        self.b_reached = b_reached


class FitError(FlowHoloError, ValueError):
    """Least-squares fit could not be performed."""
