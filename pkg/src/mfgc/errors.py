"""
Exception hierarchy for mfgc.

Every failure a solver can report is a subclass of MfgcError so the CLI can map
numerical failures to exit code 2 and configuration failures to exit code 3.
"""

from typing import Any, Optional


class MfgcError(Exception):
    """Base class for all mfgc errors."""


class DomainError(MfgcError, ValueError):
    """An argument lies outside the domain where a formula is defined."""

    def __init__(self, message: str, value: Any = None):
        super().__init__(message)
        self.value = value


class SingularSystemError(MfgcError):
    """A linear system that must be solved exactly is singular."""

    def __init__(self, message: str, determinant: float):
        super().__init__(f"{message} (determinant={determinant:.3e})")
        self.determinant = determinant


class DegeneracyError(MfgcError):
    """LQ parameters sit on a degeneracy manifold; carries the classification."""

    def __init__(self, report: Any):
        super().__init__(
            f"Degenerate LQ parameters: {report.classification.value} ({report.violated_condition})"
        )
        self.report = report


class NonConvergenceError(MfgcError):
    """An iteration stopped without meeting its tolerance."""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(f"{message} after {iterations} iterations (residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class NonContractionError(NonConvergenceError):
    """A fixed-point map was detected to be non-contractive."""

    def __init__(self, message: str, iterations: int, residual: float, factor: float):
        super().__init__(f"{message} (contraction factor ~ {factor:.4f})", iterations, residual)
        self.factor = factor


class CoercivityError(MfgcError):
    """A Legendre argmax iterate escaped the configured coercivity bound."""

    def __init__(self, norm: float, bound: float):
        super().__init__(f"Argmax iterate |a|={norm:.3e} exceeds coercivity bound {bound:.3e}")
        self.norm = norm
        self.bound = bound


class CallbackError(MfgcError):
    """A user-supplied cost callback returned non-finite output."""

    def __init__(self, callback: str, detail: Optional[str] = None):
        message = f"Callback '{callback}' returned non-finite output"
        if detail:
            message += f": {detail}"
        super().__init__(message)
        self.callback = callback


class BlowUpError(MfgcError):
    """A simulated path left the finite range."""

    def __init__(self, node: int):
        super().__init__(f"Non-finite state encountered at time node {node}")
        self.node = node


class ConfigError(MfgcError):
    """An experiment configuration could not be loaded or validated."""

    def __init__(self, path: Any, reason: str):
        super().__init__(f"Invalid config {path}: {reason}")
        self.path = path
        self.reason = reason
