"""
Exception hierarchy for the STAR-RIS MEC simulator.

Every failure the simulator raises on purpose derives from StarMecError so the
CLI can map it onto an exit code. Constraint checks that report violations as
data (protocol.validate) do not raise.
"""

from typing import List, Optional


class StarMecError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(StarMecError):
    """A configuration value is missing, unknown or out of range."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class GeometryError(StarMecError):
    """Degenerate geometry, e.g. a UD co-located with the STAR-RIS."""


class ChannelDimensionError(StarMecError):
    """Channel vectors and coefficient diagonals disagree in length."""


class ProtocolConstraintError(StarMecError):
    """A STAR-RIS configuration violates its protocol constraints."""

    def __init__(self, violations: List["object"]):
        self.violations = list(violations)
        first = self.violations[0] if self.violations else "unknown violation"
        super().__init__(f"{len(self.violations)} protocol violation(s), first: {first}")


class InfeasibleOffloadError(StarMecError):
    """A positive offload fraction was requested over a zero-rate link."""


class DinkelbachPreconditionError(StarMecError, ValueError):
    """dinkelbach_power called with p_hat above p_max or a zero fraction."""


class UsageError(StarMecError):
    """The API or CLI was used out of order or with invalid arguments."""


class ComparisonError(StarMecError):
    """Result sets cannot be compared because their configurations differ."""


class TrainingDivergedError(StarMecError):
    """A training loss became non-finite; a diagnostic checkpoint was written."""

    def __init__(self, message: str, checkpoint_path: Optional[str] = None):
        self.checkpoint_path = checkpoint_path
        suffix = f" (checkpoint: {checkpoint_path})" if checkpoint_path else ""
        super().__init__(message + suffix)


class NetworkShapeError(StarMecError, ValueError):
    """Network input, gradient or checkpoint shapes do not match the layer widths."""
