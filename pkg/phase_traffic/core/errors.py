"""
Errors
======

Purpose: Exception hierarchy for the phase_traffic package.

Every error is a ValueError so callers that only know about bad input still
catch it. The CLI maps each class to an exit code (see EXIT_CODES).
"""

from typing import Any, Dict, Optional


class PhaseTrafficError(ValueError):
    """Base class; carries an optional details dict for reports."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}


class DomainError(PhaseTrafficError):
    """State outside the admissible domain."""


class UsageError(PhaseTrafficError):
    """Operation called on the wrong model family or with bad options."""


class ConfigError(PhaseTrafficError):
    """Invalid run configuration or model parameters."""


class DegenerateJumpError(PhaseTrafficError):
    """Rankine-Hugoniot speed requested between equal densities."""


class InfeasibleError(PhaseTrafficError):
    """Implicit equation has no root inside its bracket."""


class InvariantViolation(PhaseTrafficError):
    """A solver post-condition failed."""


class SimulationOverflow(PhaseTrafficError):
    """Front tracking hit the event cap."""


EXIT_CODES = {
    DomainError: 2,
    UsageError: 2,
    ConfigError: 2,
    DegenerateJumpError: 1,
    InfeasibleError: 1,
    InvariantViolation: 1,
    SimulationOverflow: 1,
}


def exit_code_for(error: Exception) -> int:
    """Exit status for an exception raised below the CLI."""
    for cls, code in EXIT_CODES.items():
        if isinstance(error, cls):
            return code
    return 1
