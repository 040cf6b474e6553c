"""Exception types shared across the toolkit."""


class SoftgateError(Exception):
    """Base class for all toolkit errors."""


class FormatError(SoftgateError):
    """A file does not conform to its declared binary or text layout."""


class DimensionMismatch(SoftgateError):
    """Vector/matrix operands disagree on dimension."""


class EmptyClassError(SoftgateError):
    """A class has no rows where at least one is required."""

    def __init__(self, label: int, message: str | None = None):
        self.label = label
        super().__init__(message or f"class {label} has no rows")


class ParameterError(SoftgateError):
    """An argument is outside its documented range."""


class ReportError(SoftgateError):
    """Report assembly failed (missing mandatory input)."""
