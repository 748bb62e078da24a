"""Exception types raised across the package."""


class CBMLError(Exception):
    """Base class for all package errors."""


class ZeroNormRow(CBMLError, ValueError):
    def __init__(self, index: int):
        super().__init__(f"row {index} has (near) zero norm")
        self.index = index


class InsufficientPairs(CBMLError, ValueError):
    pass


class InsufficientVariance(CBMLError, ValueError):
    pass


class DegenerateFit(CBMLError, ValueError):
    pass


class NonFiniteLoss(CBMLError, ArithmeticError):
    pass


class NonFiniteGradient(CBMLError, ArithmeticError):
    pass


class InsufficientClasses(CBMLError, ValueError):
    pass


class DimMismatch(CBMLError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ParseError(CBMLError, ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class KTooLarge(CBMLError, ValueError):
    pass


class KOutOfRange(CBMLError, ValueError):
    pass


class LengthMismatch(CBMLError, ValueError):
    pass


class NoPairs(CBMLError, ValueError):
    pass


class EmptySide(CBMLError, ValueError):
    pass


class ConfigError(CBMLError, ValueError):
    pass


class ModelFormatError(CBMLError, ValueError):
    pass
