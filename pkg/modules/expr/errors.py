from modules.utils.errors import NoiseCalcError


class ExprError(NoiseCalcError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, position, expected=None):
        detail = f"{message} at position {position}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)
        self.position = position
        self.expected = expected


class UnknownIdentifierError(ExprError):
    def __init__(self, name, position):
        super().__init__(f"unknown identifier '{name}' at position {position}")
        self.name = name
        self.position = position


class ExprEvaluationError(ExprError, ArithmeticError):
    def __init__(self, message, span, x=None, t=None):
        super().__init__(f"{message} at {span[0]}..{span[1]} (x={x}, t={t})")
        self.span = span
        self.x = x
        self.t = t


class UnsupportedDerivativeError(ExprError):
    pass
