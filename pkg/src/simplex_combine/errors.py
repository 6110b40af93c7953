"""Exception types raised across the package."""


class SimplexCombineError(Exception):
    """Base class for all package errors."""


class NonPositiveEntry(SimplexCombineError, ValueError):
    pass


class NotZeroSum(SimplexCombineError, ValueError):
    pass


class DimensionMismatch(SimplexCombineError, ValueError):
    pass


class InsufficientRows(SimplexCombineError, ValueError):
    pass


class ZeroVariation(SimplexCombineError, ValueError):
    """All forecasters carry identical relative information; nothing to scale."""


class SchemaError(SimplexCombineError, ValueError):
    pass


class ParseError(SimplexCombineError, ValueError):
    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)


class EmptyPanel(SimplexCombineError, ValueError):
    pass


class MissingActual(SimplexCombineError, ValueError):
    pass


class InvalidK(SimplexCombineError, ValueError):
    pass


class ZeroActual(SimplexCombineError, ValueError):
    pass


class ZeroMsfe(SimplexCombineError, ValueError):
    pass


class ZeroMean(SimplexCombineError, ValueError):
    pass


class MissingRun(SimplexCombineError, FileNotFoundError):
    pass


class ConfigError(SimplexCombineError, ValueError):
    pass
