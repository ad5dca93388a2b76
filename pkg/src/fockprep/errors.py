"""Exception types shared across the package."""


class FockPrepError(Exception):
    """Base class for library errors."""


class DimensionError(FockPrepError, ValueError):
    """Invalid or mismatched Fock dimension."""


class NoSolutionError(FockPrepError):
    """Dimension search exhausted its range without a match."""


class NumericGuardError(FockPrepError):
    """A numeric guard tripped in a context where it is fatal."""
