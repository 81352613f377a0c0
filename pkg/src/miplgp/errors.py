"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific type that applies rather than bare RuntimeError.
"""


class MiplgpError(Exception):
    """Base class for all package-specific errors."""


class DatasetFormatError(MiplgpError, ValueError):
    """A dataset, pool, or model file is malformed or inconsistent."""


class DimensionMismatchError(MiplgpError, ValueError):
    """Inputs disagree on feature dimension or label-space width."""


class NumericError(MiplgpError, RuntimeError):
    """A numerical routine failed (non-PD covariance, divergence, non-finite loss)."""
