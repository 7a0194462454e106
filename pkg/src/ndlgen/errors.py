"""Exception types shared across the package."""

from __future__ import annotations


class NDLError(Exception):
    """Base class for all errors raised by ndlgen."""


class ModelError(NDLError, ValueError):
    pass


class DuplicateName(ModelError):
    pass


class UnknownVariableRef(ModelError):
    pass


class EmptyDomain(ModelError):
    pass


class UnknownConstraintType(ModelError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return Exception.__str__(self)


class ModelMismatch(ModelError):
    pass


class InvalidSize(ModelError):
    pass


class NDLSyntaxError(NDLError, SyntaxError):
    """Malformed operator source; carries 1-based line and column."""

    def __init__(self, msg: str, line: int, col: int, text: str | None = None):
        super().__init__(f"{msg} (line {line}, column {col})")
        self.msg = msg
        self.lineno = line
        self.offset = col
        self.text = text

    def __str__(self) -> str:
        return f"{self.msg} (line {self.lineno}, column {self.offset})"


class EmptyCore(NDLError):
    """Every atom of a program is an intron; nothing is left to execute."""


class UnprunedProgram(NDLError):
    pass


class DomainViolation(NDLError):
    pass


class NoModifiableVariables(NDLError):
    pass


class DepthInfeasible(NDLError):
    pass


class FitnessSpecError(NDLError, ValueError):
    pass
