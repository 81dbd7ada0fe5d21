"""Exceptions raised across mmdemosaick and the exit codes the CLI maps them to."""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class MMDemosaickError(Exception):
    """Base class for every error raised by the package."""

    exit_code = EXIT_DATA


class UsageError(MMDemosaickError):
    """Bad command line."""

    exit_code = EXIT_USAGE


class ShapeError(MMDemosaickError, ValueError):
    """Array shapes or channel counts do not line up."""


class DimensionError(ShapeError):
    """Padding or patch size does not fit the image."""


class ArgumentError(MMDemosaickError, ValueError):
    """Argument outside its valid range, or an unknown name."""


class DomainError(MMDemosaickError, ValueError):
    """Input value outside the model's domain (e.g. negative intensity)."""


class DegenerateFilterError(MMDemosaickError, ValueError):
    """A raw filter is constant so it cannot be normalised."""


class FormatError(MMDemosaickError):
    """Malformed model or image file."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(MMDemosaickError, FloatingPointError):
    """NaN or Inf showed up where finite values are required."""

    exit_code = EXIT_NUMERIC
