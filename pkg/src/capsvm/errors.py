"""Exception types shared across the package."""


class CapsvmError(Exception):
    """Base class for all package-specific errors."""


class ParseError(CapsvmError, ValueError):
    """Malformed input file; the message carries the offending line number."""


class LabelError(ParseError):
    """Label outside the accepted {0, 1, -1, +1} set."""


class ConfigError(CapsvmError, ValueError):
    """Incompatible configuration, e.g. penalty mode vs. kernel family mismatch."""


class CapacityError(CapsvmError, OverflowError):
    """A count exceeds the representable integer range."""


class NumericError(CapsvmError, ArithmeticError):
    """A computation produced a non-finite value."""


class FormatError(CapsvmError, ValueError):
    """Serialized artifact violates its schema or carries an unknown version."""


class ExtractionError(CapsvmError, RuntimeError):
    """Model extraction attempted from a non-optimal solver result."""


class HarnessError(CapsvmError, RuntimeError):
    """Cross-validation run could not produce any valid grid point."""
