"""Exception hierarchy. Everything raised on purpose derives from LevsketchError."""


class LevsketchError(Exception):
    """Base class for all levsketch errors."""


class FormatError(LevsketchError):
    """Malformed file or payload (ragged CSV rows, bad magic, non-finite data)."""


class ParseError(FormatError):
    """A field failed to parse; message carries the row/column location."""


class CapacityError(LevsketchError):
    """An allocation would exceed the configured memory cap."""


class DimensionMismatchError(LevsketchError):
    """Operands disagree on shape."""


class IncompatibleSketchError(LevsketchError):
    """Sketch states with different specs cannot be merged."""


class DegenerateInputError(LevsketchError):
    """Input is degenerate for the requested operation (e.g. all-zero matrix)."""


class SingularInversionError(LevsketchError):
    """An exactly-zero singular value would be inverted."""


class UnsupportedFamilyError(LevsketchError):
    """The sketch family is unknown or not usable in this context."""


class ConfigurationError(LevsketchError):
    """Invalid parameter combination."""
