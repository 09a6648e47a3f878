"""Exception taxonomy shared across the toolkit.

Each class carries the process exit code the CLI maps it to.
"""


class ToolkitError(Exception):
    exit_code = 1


class ConfigError(ToolkitError):
    """Invalid configuration, parameters, or option combinations."""

    exit_code = 2


class DataError(ToolkitError):
    """Malformed, missing, or insufficient input data."""

    exit_code = 3


class NumericError(ToolkitError):
    """Non-finite values produced during a numeric computation."""

    exit_code = 4
