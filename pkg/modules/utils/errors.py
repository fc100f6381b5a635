"""Exception hierarchy shared by every noisecalc module."""


class NoiseCalcError(Exception):
    pass


class InvalidInputError(NoiseCalcError, ValueError):
    """Input rejected before any computation."""


class DomainEvaluationError(NoiseCalcError, ArithmeticError):
    """A coefficient was evaluated outside its domain."""

    def __init__(self, message, x=None, t=None):
        super().__init__(message)
        self.x = x
        self.t = t


class NumericalError(NoiseCalcError, ArithmeticError):
    """Divergence or an unstable numerical setup."""

    def __init__(self, message, admissible=None):
        super().__init__(message)
        self.admissible = admissible


class ConfigError(NoiseCalcError):
    pass
