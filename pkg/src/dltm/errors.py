"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage problems exit 1,
:class:`DataError` exits 2, :class:`NumericalError` exits 3.
"""


class DltmError(Exception):
    """Base class for all package-specific errors."""


class DataError(DltmError):
    """Malformed or inconsistent input data (corpus files, records, configs)."""


class NumericalError(DltmError):
    """Numerical failure during inference (divergence, non-finite objective)."""
