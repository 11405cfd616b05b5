"""Exception types shared across the package."""


class SpinscapeError(Exception):
    """Base class for spinscape-specific failures."""


class NumericalError(SpinscapeError):
    """A numerical routine (eigensolver, optimizer) failed irrecoverably."""


class RecordError(SpinscapeError):
    """An experiment record file is malformed or has an unsupported schema."""


class InsufficientDataError(SpinscapeError):
    """Not enough qualifying data points for a statistical analysis."""
