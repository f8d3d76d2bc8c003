"""Exception types shared across the package."""


class IsofitError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(IsofitError):
    """A vector's length does not match the declared dimension."""


class DegeneratePair(IsofitError):
    """A coordinate pair sums to zero, so the ratio map is undefined there."""


class DomainViolation(IsofitError):
    """An argument lies outside the mathematical domain of the operation."""


class NonFiniteValue(IsofitError):
    """A numerical probe produced NaN or infinity."""


class StabilityViolation(IsofitError):
    """An explicit time step exceeds the stability bound of the scheme."""


class NonFiniteState(IsofitError):
    """The PDE state became non-finite during integration."""


class EmptyChain(IsofitError):
    """A chain operation was requested on zero post-burn-in records."""


class ZeroSignal(IsofitError):
    """The reference signal has zero norm, so a relative error is undefined."""


class ConfigError(IsofitError):
    """A run configuration is internally inconsistent or unreadable."""
