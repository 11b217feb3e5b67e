"""Exception hierarchy shared by the numerical core.

Two roots, because the CLI maps them to different exit codes: a
``PreconditionError`` means the caller asked for something the mathematics does
not allow (exit 2), a ``NumericalFailure`` means a well-posed computation did not
deliver (exit 3). Diagnostics travel as attributes so callers never have to
parse messages.
"""
from __future__ import annotations

from typing import Any


class PreconditionError(ValueError):
    """The inputs violate a precondition of the requested operation."""


class InvalidGridError(PreconditionError):
    """A grid or field does not have the shape the operation needs."""


class ModelMismatchError(PreconditionError):
    """The model selector does not match the requested energy."""


class UnsupportedPotentialError(PreconditionError):
    """The potential lacks a property the operation relies on (w > 0, constant d4)."""


class DegenerateDirectionError(PreconditionError):
    """The cubic moment of a direction vanishes, so the quotient is undefined."""


class ResonanceError(PreconditionError):
    """alpha sits on the in-plane lattice, where coercivity of the film energy fails."""


class FieldFormatError(PreconditionError):
    """A PFCF field file could not be read or written."""


class ConfigReadError(PreconditionError):
    """A configuration or potential file exists but could not be understood."""


class RecordWriteError(PreconditionError):
    """An output record file could not be written."""


class NumericalFailure(RuntimeError):
    """A well-posed computation failed to produce a trustworthy result."""


class EstimationFailedError(NumericalFailure):
    """Every estimator restart ended on a degenerate (M3 = 0) direction."""

    def __init__(self, message: str, diagnostics: list[dict[str, Any]] | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or []


class StalledFlowError(NumericalFailure):
    """The relaxation time step underflowed before the energy settled."""

    def __init__(self, message: str, trace: list[Any] | None = None) -> None:
        super().__init__(message)
        self.trace = trace or []


class NonMonotoneVerdictError(NumericalFailure):
    """Verdicts along an a-scan at fixed m are not ordered global → not-global."""

    def __init__(self, message: str, offending: tuple[float, float, str]) -> None:
        super().__init__(message)
        self.offending = offending


class ContractViolation(NumericalFailure):
    """An enforced numerical contract did not hold."""
