"""Exception hierarchy shared by every module of the package."""

from typing import Any, Dict, Optional


class ImpreciseCopulaError(Exception):
    """Base class for all errors raised by imprecise_copula."""


class DomainError(ImpreciseCopulaError, ValueError):
    """A parameter or argument lies outside the domain of its family."""


class BoundaryError(DomainError):
    """A strictly-interior evaluation was requested on the unit-square boundary."""


class InputError(ImpreciseCopulaError, ValueError):
    """Malformed or insufficient input data, counts or configuration."""


class DegenerateInputError(InputError):
    """Input data is degenerate (e.g. zero variance)."""


class NumericError(ImpreciseCopulaError, ArithmeticError):
    """A numerical procedure failed to converge."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)


class ConvergenceError(NumericError):
    """MCMC accepted no proposal after burn-in."""


class NoViableModelError(ImpreciseCopulaError):
    """Every candidate model has zero evidence or falls below the plausibility threshold."""


class SupportError(ImpreciseCopulaError):
    """A density is positive where the sampling density is zero."""


class StageError(ImpreciseCopulaError):
    """A pipeline stage failed; carries the stage name and context."""

    def __init__(self, stage: str, message: str, context: Optional[Dict[str, Any]] = None):
        self.stage = stage
        self.context = dict(context or {})
        super().__init__(f"[{stage}] {message}")
