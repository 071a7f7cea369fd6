"""Exception hierarchy; the CLI maps each family to an exit code."""


class RadsynthError(Exception):
    exit_code = 1


class ConfigError(RadsynthError, ValueError):
    """Inconsistent parameters (bad g, too few images for the folds, ...)."""

    exit_code = 2


class InvalidInputError(RadsynthError, ValueError):
    """Malformed image, mask, map or parameter values."""

    exit_code = 3


class ParseError(InvalidInputError):
    """A file does not match its declared format."""

    def __init__(self, message, offset=None):
        self.detail = message
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ShapeError(InvalidInputError):
    pass


class DomainError(RadsynthError, ArithmeticError):
    """A statistic or feature is undefined for the given values."""

    exit_code = 4


class EmptyGlcmError(DomainError):
    pass


class UninitializedStatsError(DomainError, RuntimeError):
    pass
