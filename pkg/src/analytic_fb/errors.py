"""Exception hierarchy. Each class carries a short machine-readable category."""


class AnalyticFBError(Exception):
    category = "error"


class FormatError(AnalyticFBError, ValueError):
    category = "format"


class ConfigError(AnalyticFBError, ValueError):
    category = "config"


class ShapeError(AnalyticFBError, ValueError):
    category = "shape"


class DegenerateSignalError(AnalyticFBError, ValueError):
    category = "degenerate-signal"


class ConditioningError(AnalyticFBError, ArithmeticError):
    category = "conditioning"


class InvalidStepError(AnalyticFBError, ValueError):
    category = "invalid-step"
