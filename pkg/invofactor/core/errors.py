"""Exception hierarchy shared by the library, the CLI and the HTTP layer."""
import enum
from typing import Any, Optional


class InvofactorError(Exception):
    code = "InvofactorError"

    def __init__(self, message: str = "", **detail: Any):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.detail = detail

    def to_dict(self) -> dict:
        return {"error": self.code, "message": self.message, "detail": {k: str(v) for k, v in self.detail.items()}}


class MalformedInput(InvofactorError):
    code = "MalformedInput"


# algebra
class DivisionByZero(InvofactorError):
    code = "DivisionByZero"


class FieldMismatch(InvofactorError):
    code = "FieldMismatch"


class DerogatoryInput(InvofactorError):
    code = "DerogatoryInput"


class NotSplit(InvofactorError):
    code = "NotSplit"


class ZeroLambda(InvofactorError):
    code = "ZeroLambda"


# linalg
class ShapeMismatch(InvofactorError):
    code = "ShapeMismatch"


class Singular(InvofactorError):
    code = "Singular"


class NotAnnihilated(InvofactorError):
    code = "NotAnnihilated"


class NoDominantEigenvalue(InvofactorError):
    code = "NoDominantEigenvalue"


# opcore
class UnknownIndex(InvofactorError):
    code = "UnknownIndex"


class NoWitness(InvofactorError):
    code = "NoWitness"


class NotReached(InvofactorError):
    code = "NotReached"


class NotInvertible(InvofactorError):
    code = "NotInvertible"


# modulestruct
class BoundExceeded(InvofactorError):
    code = "BoundExceeded"


class BuilderStuck(InvofactorError):
    code = "BuilderStuck"


class NotSemiGood(InvofactorError):
    code = "NotSemiGood"


class PreconditionViolation(InvofactorError):
    code = "PreconditionViolation"


# factorize
class NoFreePart(InvofactorError):
    code = "NoFreePart"


class NotAcceptable(InvofactorError):
    code = "NotAcceptable"


class NotElementaryEvidence(InvofactorError):
    code = "NotElementaryEvidence"


class HypothesisViolation(InvofactorError):
    code = "HypothesisViolation"


class UnsupportedField(InvofactorError):
    code = "UnsupportedField"


class RefusalReason(str, enum.Enum):
    NOT_ACCEPTABLE = "NotAcceptable"
    DETERMINANT_OBSTRUCTION = "DeterminantObstruction"
    SEARCH_EXHAUSTED = "SearchExhausted"


class Refused(InvofactorError):
    code = "Refused"

    def __init__(self, reason: RefusalReason, message: str = "", **detail: Any):
        super().__init__(message or reason.value, **detail)
        self.reason = reason

    def to_dict(self) -> dict:
        payload = super().to_dict()
        payload["reason"] = self.reason.value
        return payload


# glsearch
class BudgetExceeded(InvofactorError):
    code = "BudgetExceeded"

    def __init__(self, message: str = "", required: Optional[int] = None, budget: Optional[int] = None, **detail: Any):
        super().__init__(message, required=required, budget=budget, **detail)
        self.required = required
        self.budget = budget
