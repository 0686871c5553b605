"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A parameter is outside its documented domain (e.g. tau < 1, s_max < 1)."""


class DomainError(ValueError):
    """A numeric input violates a function's domain (non-positive CQI, rate, ...)."""


class DegeneratePairError(ValueError):
    """Crossing point requested for a pair with equal averaged rates."""


class InconsistencyError(ValueError):
    """Structurally inconsistent inputs (missing state, broken allocation, ...)."""


class QuadratureError(RuntimeError):
    """Numerical integration failed to reach the requested accuracy."""

    def __init__(self, message, estimates=None):
        super().__init__(message)
        self.estimates = estimates


class ConvergenceError(RuntimeError):
    """Fixed-point iteration exhausted max_iter; carries the last iterate."""

    def __init__(self, message, rates=None, residuals=None, iterations=None):
        super().__init__(message)
        self.rates = rates
        self.residuals = residuals
        self.iterations = iterations


class ConfigError(ValueError):
    """Malformed experiment configuration; names the offending key."""
