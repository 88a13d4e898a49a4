"""Shared exception types."""


class ConfigError(ValueError):
    """A configuration value violates its stated constraint."""


class SnapshotFormatError(ValueError):
    """A field snapshot file is malformed or has the wrong version."""


class ExplosionError(RuntimeError):
    """A time integration produced a nonfinite or over-threshold state."""

    def __init__(self, t, norm, message=None):
        self.t = t
        self.norm = norm
        super().__init__(message or f"solution exploded at t={t:.6g} (norm={norm:.6g})")


class EstimationError(RuntimeError):
    """A Monte-Carlo estimate did not reach the requested accuracy."""
