"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class MixMergeError(Exception):
    exit_code = 1


class ConfigError(MixMergeError):
    exit_code = 2


class ParameterError(ConfigError, ValueError):
    """An argument violates a documented bound."""


class StructuralError(MixMergeError, ValueError):
    """Shapes, lengths or domain counts do not line up."""

    exit_code = 2


class CapacityError(MixMergeError):
    exit_code = 3


class PairingError(MixMergeError):
    exit_code = 3

    def __init__(self, message, unmatched=()):
        super().__init__(message)
        self.unmatched = list(unmatched)


class AbsenceError(PairingError):
    pass


class NumericError(MixMergeError, ArithmeticError):
    exit_code = 4


class FactorizationError(NumericError):
    def __init__(self, message, pivot_index):
        super().__init__(message)
        self.pivot_index = pivot_index


class DivergenceError(NumericError):
    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class UndefinedCorrelationError(NumericError):
    pass


class DegenerateError(NumericError):
    pass
