"""Exception hierarchy shared by the library and the command line.

Every error carries a stable ``code`` (used in reports and diagnostics) and
the process ``exit_code`` the CLI maps it to.
"""

from __future__ import annotations

from typing import Optional

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_BUDGET = 4


class ToricArakelovError(Exception):
    """Base class for all errors raised by :mod:`toric_arakelov`."""

    code = "error"
    exit_code = EXIT_PRECONDITION

    def __init__(self, message: str = "", *, code: Optional[str] = None) -> None:
        super().__init__(message or self.code)
        if code is not None:
            self.code = code

    @property
    def message(self) -> str:
        return str(self.args[0]) if self.args else self.code


# ── parse / validation ─────────────────────────────────────────────────


class SpecError(ToricArakelovError):
    """A divisor specification document could not be parsed or validated."""

    code = "parse-error"
    exit_code = EXIT_PARSE

    def __init__(self, message: str, *, path: str = "$") -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


class InvalidParametersError(ToricArakelovError):
    code = "invalid-parameters"
    exit_code = EXIT_PARSE


# ── preconditions ──────────────────────────────────────────────────────


class PreconditionError(ToricArakelovError):
    """An operation was called on data that violates its precondition."""

    code = "precondition"


class ConstructionError(PreconditionError):
    """An object failed its constructor invariants."""

    code = "construction-error"


class NotRepresentableError(ConstructionError):
    """The result would leave the log-rational field (for example log p * log q)."""

    code = "not-representable"


class NotFullDimensionalError(PreconditionError):
    code = "not-full-dimensional"


class EmptyPolytopeError(PreconditionError):
    code = "empty"


class UnboundedPolyhedronError(PreconditionError):
    code = "unbounded"


class NotInStabilitySetError(PreconditionError):
    code = "not-in-stability-set"


class EmptyStabilitySetError(PreconditionError):
    code = "empty-stability-set"


class PointOutsidePolytopeError(PreconditionError):
    code = "point-outside-polytope"


class PointNotInThetaError(PreconditionError):
    code = "point-not-in-theta"


class ThetaEmptyError(PreconditionError):
    code = "theta-empty"


class NotSemipositiveError(PreconditionError):
    code = "not-semipositive"


class NotPseudoEffectiveError(PreconditionError):
    code = "not-pseudo-effective"


class NotBigError(PreconditionError):
    code = "not-big"


class NotARefinementError(PreconditionError):
    code = "not-a-refinement"


class IncomparableFansError(PreconditionError):
    code = "incomparable-fans"


class OraclePathUnsupportedError(PreconditionError):
    code = "oracle-path-unsupported"


class UnsupportedFieldError(PreconditionError):
    code = "unsupported-field"


class ProductNotStrictlyLessError(PreconditionError):
    code = "product-not-strictly-less"


class FaceNotRationalDirectionError(PreconditionError):
    code = "face-not-rational-direction"


class GridTooCoarseError(PreconditionError):
    code = "grid-too-coarse"


# ── budgets ────────────────────────────────────────────────────────────


class BudgetExceededError(ToricArakelovError):
    """A numeric procedure hit its configured work cap before converging."""

    code = "budget-exceeded"
    exit_code = EXIT_BUDGET


__all__ = [
    "EXIT_BUDGET",
    "EXIT_OK",
    "EXIT_PARSE",
    "EXIT_PRECONDITION",
    "BudgetExceededError",
    "ConstructionError",
    "EmptyPolytopeError",
    "EmptyStabilitySetError",
    "FaceNotRationalDirectionError",
    "GridTooCoarseError",
    "IncomparableFansError",
    "InvalidParametersError",
    "NotARefinementError",
    "NotBigError",
    "NotFullDimensionalError",
    "NotInStabilitySetError",
    "NotPseudoEffectiveError",
    "NotRepresentableError",
    "NotSemipositiveError",
    "OraclePathUnsupportedError",
    "PointNotInThetaError",
    "PointOutsidePolytopeError",
    "PreconditionError",
    "ProductNotStrictlyLessError",
    "SpecError",
    "ThetaEmptyError",
    "ToricArakelovError",
    "UnboundedPolyhedronError",
    "UnsupportedFieldError",
]
