"""Exception hierarchy shared across the package."""


class SmitheqError(Exception):
    """Base class for all package errors."""


class UsageError(SmitheqError):
    """A caller violated a precondition (mismatched variables, bad dimensions, ...)."""


class DivisibilityError(SmitheqError):
    """An exact division was requested but the divisor does not divide the dividend."""


class RankError(SmitheqError):
    """An operation needed a different rank than the input has."""


class IndependenceError(SmitheqError):
    """Linear forms expected to be independent are not."""


class InternalConsistencyError(SmitheqError):
    """A fact that is a theorem failed at runtime; this signals a bug, not bad input."""


class ParseError(SmitheqError):
    """Text input did not match the grammar; carries a location."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class ReductionFailure(SmitheqError):
    """A constructive reduction step failed; `marker` names the failing step.

    Markers: 'kernel-not-ZLP', 'completion-not-found', 'unsupported-shape'.
    """

    def __init__(self, marker, message=""):
        self.marker = marker
        super().__init__(message or marker)
