"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MdpConcError(Exception):
    """Base class for every error raised by this package."""

    code = "MdpConcError"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


# -- model / core -----------------------------------------------------------


class ModelError(MdpConcError, ValueError):
    code = "ModelError"


class DimensionMismatch(ModelError):
    code = "DimensionMismatch"


class NonStochasticRow(ModelError):
    code = "NonStochasticRow"

    def __init__(self, s: int, a: int, deficit: float, message: str | None = None):
        self.s, self.a, self.deficit = s, a, deficit
        super().__init__(
            message or f"P(.|s={s}, a={a}) is not a distribution (1 - sum = {deficit!r})"
        )

    def to_dict(self) -> dict:
        return {**super().to_dict(), "s": self.s, "a": self.a, "deficit": self.deficit}


class RewardOutOfRange(ModelError):
    code = "RewardOutOfRange"

    def __init__(self, s: int, a: int, value: float, r_max: float):
        self.s, self.a, self.value, self.r_max = s, a, value, r_max
        super().__init__(f"r(s={s}, a={a}) = {value!r} outside [0, {r_max!r}]")

    def to_dict(self) -> dict:
        return {**super().to_dict(), "s": self.s, "a": self.a, "value": self.value}


class InvalidPolicy(ModelError):
    code = "InvalidPolicy"


class EnumerationTooLarge(MdpConcError):
    code = "EnumerationTooLarge"

    def __init__(self, count: int, cap: int):
        self.count, self.cap = count, cap
        super().__init__(f"{count} policies exceed the enumeration cap {cap}")


# -- solvers ----------------------------------------------------------------


class SolverError(MdpConcError):
    code = "SolverError"


class SingularSystem(SolverError):
    code = "SingularSystem"


class NotInPiAR(SolverError):
    code = "NotInPiAR"


class NoConvergence(SolverError):
    code = "NoConvergence"

    def __init__(self, max_iter: int, residual: float, what: str = "iteration"):
        self.max_iter, self.residual = max_iter, residual
        super().__init__(f"{what} did not converge in {max_iter} steps (residual {residual!r})")


class NotSolvableHint(SolverError):
    code = "NotSolvableHint"


# -- stats / bounds ---------------------------------------------------------


class EmptyVector(MdpConcError, ValueError):
    code = "EmptyVector"


class DomainError(MdpConcError, ValueError):
    code = "DomainError"


class KZero(DomainError):
    code = "KZero"


class InfiniteDiameter(DomainError):
    code = "InfiniteDiameter"


class HorizonExceeded(DomainError):
    code = "HorizonExceeded"


# -- simulation -------------------------------------------------------------


class InconsistentValueFunction(MdpConcError):
    code = "InconsistentValueFunction"


class SigmaDegenerate(MdpConcError):
    code = "SigmaDegenerate"
