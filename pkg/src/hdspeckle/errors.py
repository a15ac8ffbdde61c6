"""Exception types shared across the package.

The CLI maps these onto distinct process exit codes, so keep the
hierarchy flat and the categories coarse: configuration/precondition
problems, malformed files, dimension mismatches, degenerate numerics.
"""


class HdcError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(HdcError, ValueError):
    """Invalid configuration or violated operation precondition."""


class DimensionError(HdcError, ValueError):
    """Mismatched or out-of-bounds dimensions."""


class FormatError(HdcError, ValueError):
    """Malformed, truncated, or unsupported file content."""


class DegenerateDataError(HdcError, ValueError):
    """Zero-variance or otherwise degenerate numeric input."""
