"""Exception hierarchy shared by all modules."""


class MorsehamError(Exception):
    """Base class for every error raised by the package."""


class DomainError(MorsehamError, ValueError):
    """Invalid (non-finite or out-of-range) numerical input."""


class ConfigError(MorsehamError):
    """Experiment configuration failed validation."""


class SolverError(MorsehamError):
    """A numerical procedure broke down."""


class NotFoundError(SolverError):
    """Shooting could not locate a solution with the requested nodal pattern."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConsistencyError(SolverError):
    """A computed object violates an invariant it must satisfy by construction."""


class DegeneracyError(SolverError):
    """A zero of a solution component is not simple."""


class AmbiguityError(MorsehamError):
    """An integer count depends on a value lying within tolerance of a tie."""
