"""Exception hierarchy shared by every subpackage."""


class CtdeLabError(Exception):
    pass


class DimensionError(CtdeLabError, ValueError):
    pass


class ModelIntegrityError(CtdeLabError, ValueError):
    pass


class ZeroProbabilityError(CtdeLabError, ValueError):
    pass


class UnsupportedError(CtdeLabError):
    pass


class EnumerationBudgetError(CtdeLabError):
    pass


class SpecError(CtdeLabError, ValueError):
    pass


class LifecycleError(CtdeLabError, RuntimeError):
    pass


class ConfigError(CtdeLabError, ValueError):
    """Invalid experiment or algorithm configuration; ``field`` names the culprit."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class NumericError(CtdeLabError, ArithmeticError):
    def __init__(self, message, op=None):
        super().__init__(message if op is None else f"[{op}] {message}")
        self.op = op


class AlignmentError(CtdeLabError, ValueError):
    """Learning curves from different seeds do not share evaluation points."""
