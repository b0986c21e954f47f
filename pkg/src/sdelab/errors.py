"""Exception types shared across the package."""


class SdelabError(Exception):
    """Base class for all package errors."""


class DomainError(SdelabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularDensityError(DomainError):
    """Density evaluation requested where the marginal is degenerate."""


class ConfigurationError(SdelabError, ValueError):
    """A model or experiment configuration is invalid or unrepresentable."""


class CapabilityError(SdelabError, TypeError):
    """An operation needs an optional capability the object does not carry."""


class UsageError(SdelabError, ValueError):
    """Inputs violate an estimator's usage contract (shapes, counts, caps)."""


class IntegrationDivergedError(SdelabError, RuntimeError):
    """A trajectory produced non-finite state."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"integration diverged at step {step}")
