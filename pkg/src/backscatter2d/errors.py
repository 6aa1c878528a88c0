"""Exception hierarchy shared across the package.

Two top-level families matter for the CLI exit-code contract:
``ConfigError`` (bad inputs, exit code 2) and ``NumericalError``
(compute-time failures, exit code 3). ``VerdictFailure`` (exit code 4)
is raised by experiment runners when a quantitative verdict is FAIL.
"""


class BackscatterError(Exception):
    """Base class for all package errors."""


class ConfigError(BackscatterError):
    """Invalid configuration, parameters or mismatched inputs."""


class NumericalError(BackscatterError):
    """A numerical procedure failed to reach its contract."""


class DiagnosticError(NumericalError):
    """A diagnostic precondition failed (e.g. grid too coarse for shells)."""


class QuadratureError(NumericalError):
    """Quadrature did not converge; carries the achieved tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class ResolutionError(NumericalError):
    """Grid/box resolution insufficient for the requested operator."""


class SolverError(NumericalError):
    """Iterative solver failed; carries the residual history."""

    def __init__(self, message: str, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class PartialDataError(NumericalError):
    """Dataset assembly failed for a subset of (k, theta) pairs."""

    def __init__(self, message: str, failures=None):
        super().__init__(message)
        self.failures = list(failures or [])


class EstimatorError(NumericalError):
    """Regularity estimator lacked enough reliable shells."""


class VerdictFailure(BackscatterError):
    """An experiment ran to completion but its verdict is FAIL."""
