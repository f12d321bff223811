"""Exception types shared across the package."""


class WrvcError(Exception):
    """Base class for all package-specific errors."""


class DomainError(WrvcError, ValueError):
    """An analytic operation was applied outside its domain
    (log/sqrt of a non-positive leading value, singular leading matrix, ...)."""


class DimensionMismatch(WrvcError, ValueError):
    """Operands live over different chart dimensions or matrix sizes."""


class OrderError(WrvcError, ValueError):
    """A derivative or coefficient beyond the stored truncation order was requested."""


class DeterminacyError(WrvcError, ValueError):
    """A volume-coefficient order beyond the determined range was requested."""


class ExpressionError(WrvcError, ValueError):
    """Parse or evaluation failure in the expression language.

    Carries the byte offset of the offending token when known.
    """

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)


class ModelError(WrvcError, ValueError):
    """Invalid model definition or model-file content."""
