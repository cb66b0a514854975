"""Exception hierarchy shared by the solver, integrator and analysis code."""


class GKdVError(Exception):
    """Base class for every error raised by this package."""


class SingularMatrixError(GKdVError):
    """A pivot fell below the relative singularity threshold."""


class ConvergenceError(GKdVError):
    """Newton iteration did not reach the requested tolerance.

    Attributes
    ----------
    iterations : int
        Number of iterations performed.
    residual : float
        Infinity norm of the last residual.
    """

    def __init__(self, message, iterations=0, residual=float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class EigenvalueSignError(GKdVError):
    """Robin closure evaluated with a non-positive eigenvalue."""


class BlowupError(GKdVError):
    """Iterate or field grew beyond the allowed bound."""


class InapplicableModelError(GKdVError):
    """Operation requested for a model it does not apply to."""


class OverlapError(GKdVError):
    """Two embedded waves overlap above the allowed level."""


class InsufficientDataError(GKdVError):
    """Not enough samples for a fit."""


class WindowsCoverDomainError(GKdVError):
    """Peak windows leave no grid point for a ripple measurement."""


class MismatchedRunError(GKdVError):
    """Two runs cannot be compared (model, domain or snapshot times differ)."""


class StepError(GKdVError):
    """A time step failed; carries the simulation time of the failure."""

    def __init__(self, message, t=float("nan")):
        super().__init__(message)
        self.t = t
