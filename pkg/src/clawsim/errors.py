"""Exception hierarchy."""

from __future__ import annotations


class ClawsimError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(ClawsimError, ValueError):
    pass


class DomainError(ClawsimError, ValueError):
    """A domain point or chain state is outside its valid range."""


class ModeError(ClawsimError):
    """An oracle operation was issued against a session in the wrong mode."""


class ValidationError(ClawsimError, ValueError):
    pass


class ParseError(ClawsimError, ValueError):
    """Malformed instance document. ``line``/``column`` locate the failure."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class SizeError(ClawsimError):
    """A simulation would exceed its configured state cap."""


class CalibrationError(ClawsimError):
    def __init__(self, message: str, curve: dict | None = None):
        self.curve = curve or {}
        super().__init__(message)


class FitError(ClawsimError, ValueError):
    pass
