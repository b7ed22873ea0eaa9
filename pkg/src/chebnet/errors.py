"""Exception hierarchy shared across the toolkit.

Every error raised on a user-facing path derives from ChebnetError so the
CLI can map validation problems to exit code 1 and everything else to 2.
"""


class ChebnetError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ChebnetError):
    """Input data failed validation (bad values, malformed files)."""


class DimensionError(ValidationError):
    """Shapes or sizes of inputs do not agree."""


class DomainError(ChebnetError):
    """A mathematically undefined operation was requested (e.g. negative degree)."""


class CapabilityError(ChebnetError):
    """The requested computation exceeds a configured size limit."""


class ContractError(ChebnetError):
    """A caller violated an API precondition (e.g. wrong basis, stale cache)."""


class ConfigurationError(ChebnetError):
    """A configuration value is inconsistent or unusable."""


class TrainingDivergedError(ChebnetError):
    """Training produced a non-finite loss; carries the offending epoch."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")
