"""Exception types shared across the pipeline.

Each error class carries the process exit code the CLI maps it to, so
subcommands can fail with a stable, scriptable status.
"""


class GearwatchError(Exception):
    """Base class for all pipeline failures."""

    exit_code = 1


class ConfigError(GearwatchError):
    """Bad or missing configuration (unknown keys, invalid values, unreadable file)."""

    exit_code = 2


class IngestError(GearwatchError):
    """Input data could not be loaded or failed validation."""

    exit_code = 3


class ModelingError(GearwatchError):
    """Clustering or regression failed (no usable fit, degenerate inputs)."""

    exit_code = 4


class MonitoringError(GearwatchError):
    """Control chart construction or evaluation failed."""

    exit_code = 5
