"""Quantum-walk claw finding: exact Szegedy-walk simulation and search wrappers."""

from clawsim.errors import (
    CalibrationError,
    ClawsimError,
    DomainError,
    FitError,
    ModeError,
    ParameterError,
    ParseError,
    SizeError,
    ValidationError,
)
from clawsim.instances import (
    ClawTuple,
    DomainPoint,
    OracleSession,
    ProblemInstance,
    comparison_query,
    deserialize_instance,
    make_planted_instance,
    serialize_instance,
    standard_query,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "ClawTuple",
    "ClawsimError",
    "DomainError",
    "DomainPoint",
    "FitError",
    "ModeError",
    "OracleSession",
    "ParameterError",
    "ParseError",
    "ProblemInstance",
    "SizeError",
    "ValidationError",
    "comparison_query",
    "deserialize_instance",
    "make_planted_instance",
    "serialize_instance",
    "standard_query",
]
