"""Exception hierarchy shared by every module of the package."""


class ImpulseControlError(Exception):
    """Base class for all errors raised by :mod:`impulse_control`."""


class ModelDomainError(ImpulseControlError, ValueError):
    """A user-supplied callable produced a value outside its declared domain."""

    def __init__(self, callable_name, message):
        self.callable_name = callable_name
        super().__init__(f"{callable_name}: {message}")


class UsageError(ImpulseControlError, ValueError):
    pass


class NumericError(ImpulseControlError, ArithmeticError):
    """Quadrature or a root finder did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


class DivergenceError(ImpulseControlError):
    """A strategy keeps intervening without letting time (hence discounting) advance."""


class ConvergenceError(ImpulseControlError):
    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class RegimeError(ImpulseControlError, ValueError):
    """A quantity was requested outside the parameter regime where it is defined."""


class CapacityError(ImpulseControlError, ValueError):
    def __init__(self, message, required=None):
        self.required = required
        super().__init__(message)


class UnsupportedError(ImpulseControlError, NotImplementedError):
    pass


class InfeasibleError(ImpulseControlError, ValueError):
    pass
