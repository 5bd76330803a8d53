"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
TrainingError -> 3.
"""


class VeriflowError(Exception):
    """Base class for all package errors."""


class ConfigError(VeriflowError):
    """Bad CLI arguments or experiment configuration."""


class DataError(VeriflowError):
    """Unparseable or invalid dataset / feature files."""


class TrainingError(VeriflowError):
    """Model training failed (non-finite loss, fold failure, ...)."""
