"""Exception hierarchy.

Each class carries the CLI exit code it maps to.
"""


class HemapError(Exception):
    exit_code = 1


class ConfigError(HemapError):
    """Malformed or inconsistent model configuration."""

    exit_code = 1


class ExprSyntaxError(ConfigError):
    def __init__(self, message, position=None, source=None):
        self.position = position
        self.source = source
        if position is not None:
            message = f"{message} at offset {position}"
        super().__init__(message)


class NumericalError(HemapError):
    """Non-finite state, non-convergence or a failed quadrature."""

    exit_code = 2


class ExprDomainError(NumericalError):
    """Expression evaluated outside its domain (sqrt of a negative, 1/0)."""


class ConvergenceError(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class AssumptionViolation(HemapError):
    """A standing hypothesis on the model (positivity of a, impulse products) fails."""

    exit_code = 3
