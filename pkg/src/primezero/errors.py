"""Exception types shared across the library."""


class PrimeZeroError(Exception):
    """Base class for library errors."""


class InvalidParameterError(PrimeZeroError, ValueError):
    """A constructor or operation received an out-of-domain parameter."""


class GridResolutionError(PrimeZeroError, ValueError):
    """A grid is too coarse or does not cover the required support."""


class ResourceLimitError(PrimeZeroError, RuntimeError):
    """An explicit size cap was exceeded (never truncated silently)."""


class CoverageError(PrimeZeroError, ValueError):
    """Requested range exceeds the verified coverage of a data source."""


class TableFormatError(PrimeZeroError, ValueError):
    """A zero-table stream is malformed; carries the offending line number."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


class VerificationError(PrimeZeroError, RuntimeError):
    """Cross-verification (zero counts, consistency oracles) failed."""


class NumericalConsistencyError(PrimeZeroError, RuntimeError):
    """Two evaluation routes for the same quantity disagree."""


class CalibrationError(PrimeZeroError, RuntimeError):
    """Probe calibration failed for every bump width tried."""

    def __init__(self, message, attempts=()):
        super().__init__(message)
        self.attempts = tuple(attempts)


class ConfigError(PrimeZeroError, ValueError):
    """Run configuration is invalid; names the offending field."""

    def __init__(self, field, message):
        super().__init__(f"config field '{field}': {message}")
        self.field = field
