"""
Exception taxonomy for ekman-bifurcation.

Every error raised by the toolkit derives from ToolkitError and carries the
process exit code the CLI reports for it:

- 2: the caller supplied bad parameters or violated a precondition
- 3: the mathematics failed (no bracket, no convergence, singular solve)
- 4: a verification gate was not met
"""

from typing import Any, Optional


class ToolkitError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 3

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details = details


class ParameterError(ToolkitError, ValueError):
    """Invalid parameter value."""

    exit_code = 2


class PreconditionError(ParameterError):
    """An operation precondition does not hold for the given input."""


class ResolutionError(ParameterError):
    """Grid too coarse for the requested spectral field."""


class SymmetryViolationError(ParameterError):
    """Grid data is not even-symmetric within tolerance."""


class HorizonError(ParameterError):
    """Quadrature horizon too short for the requested tolerance."""

    def __init__(self, message: str, suggested_s_max: float, **details: Any):
        super().__init__(message, suggested_s_max=suggested_s_max, **details)
        self.suggested_s_max = suggested_s_max


class NumericalFailure(ToolkitError):
    """A numerical method failed to deliver a result."""

    exit_code = 3


class SolverFailure(NumericalFailure):
    """Root finding failed (no sign change, depth exhausted)."""


class OracleFailure(NumericalFailure):
    """The matrix eigenvalue oracle found no admissible eigenvalue."""


class SingularRecursionError(NumericalFailure):
    """Backward recursion hit a vanishing denominator."""


class NonConvergenceError(NumericalFailure):
    """Iteration limit reached without meeting the tolerance."""

    def __init__(
        self,
        message: str,
        last_residual: float,
        iterations: int,
        **details: Any,
    ):
        super().__init__(
            message, last_residual=last_residual, iterations=iterations, **details
        )
        self.last_residual = last_residual
        self.iterations = iterations


class SingularJacobianError(NumericalFailure):
    """Linear solve inside Newton is numerically singular."""


class VerificationGateError(ToolkitError):
    """Independent verification did not confirm a result."""

    exit_code = 4

    def __init__(self, message: str, value: float, tolerance: float, **details):
        super().__init__(message, value=value, tolerance=tolerance, **details)
        self.value = value
        self.tolerance = tolerance


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(error, ToolkitError):
        return error.exit_code
    if isinstance(error, (ValueError, FileNotFoundError)):
        return 2
    return 1


def describe(error: BaseException) -> Optional[str]:
    """One-line description used on standard error."""
    message = str(error)
    return f"{type(error).__name__}: {message}" if message else type(error).__name__
