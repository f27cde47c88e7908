"""Exception types shared across the package."""


class UstatError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(UstatError, ValueError):
    """An argument violates an operation's precondition."""


class DimensionError(ParameterError):
    """Tensor orders or alphabet sizes do not line up."""


class CapacityError(UstatError):
    """The request exceeds the exact-computation limits of the implementation."""


class ConfigurationError(UstatError):
    """Invalid or inconsistent run configuration."""


class PreconditionError(UstatError):
    """A mathematical precondition (degeneracy, positive variance, ...) fails."""


class ContractViolationError(UstatError):
    """Two supposedly-agreeing computations disagree beyond tolerance."""
