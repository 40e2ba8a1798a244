"""Exception hierarchy for NovCalc.

Every error is a ValueError so callers that only care about "bad input"
can catch one type. Messages explain what went wrong in terms of the
underlying algebra, not just that something failed. Errors that can point
at a concrete offending object carry it in ``witness``.
"""

from typing import Any, Optional


class NovCalcError(ValueError):
    """Base class for all NovCalc domain errors."""

    def __init__(self, message: str, witness: Optional[Any] = None):
        super().__init__(message)
        self.witness = witness


# Novikov arithmetic

class NotAUnit(NovCalcError):
    """Raised when inverting an element whose leading coefficient is not ±1."""


class TruncationTooCoarse(NovCalcError):
    """Raised when a computation needs more T-adic precision than is available."""


class NotAComplex(NovCalcError):
    """Raised when a differential does not square to zero."""


# Flow categories

class DSquaredNonzero(NotAComplex):
    """Raised when assembled rigid counts fail d∘d = 0; witness is (x, y)."""


class MissingCount(NovCalcError):
    """Raised when a rigid morphism record carries no signed count."""


class SplitInvalid(NovCalcError):
    """Raised when a split of objects admits a forbidden morphism."""


class NoHomotopyAtTruncation(NovCalcError):
    """Raised when the chain-homotopy linear system has no solution."""


class NegativeValuationEntry(NovCalcError):
    """Raised when a rebased differential entry has negative valuation."""


class DegreeMismatch(NovCalcError):
    """Raised when a basis change mixes generators of different degrees."""


class ValuationNotPositive(NovCalcError):
    """Raised when a rescaling series 1 + u has val(u) <= 0."""


# Stratified spaces

class InvariantViolation(NovCalcError):
    """Raised when a combinatorial stratified space is malformed."""


# Sections and perturbations

class IncompatibleBoundary(NovCalcError):
    """Raised when boundary data disagree on a shared face."""


class BudgetExceeded(NovCalcError):
    """Raised when zero isolation exhausts its subdivision budget."""


class NotTransverse(NovCalcError):
    """Raised when a signed count is requested for a non-transverse section."""


class CurveTrackingFailure(NovCalcError):
    """Raised when a zero curve cannot be followed to the domain boundary."""


# Documents

class ParseError(NovCalcError):
    """Raised when document text is not well-formed JSON or element text."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(message, witness=(line, column))
        self.line = line
        self.column = column


class SchemaError(NovCalcError):
    """Raised when a document is well-formed but violates the schema."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(message, witness=path)
        self.path = path
