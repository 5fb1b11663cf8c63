"""Exception types shared across the library."""


class OdexError(Exception):
    """Base class for all library-specific errors."""


class SingularGram(OdexError):
    """Gram matrix stayed non-positive-definite after jitter escalation."""


class DimensionMismatch(OdexError):
    """State, observation, or trajectory shapes do not agree."""


class MissingDerivativeInfo(OdexError):
    """A derivative of the vector field was requested but neither an
    analytic form nor a finite-difference fallback is available."""


class SingularParameter(OdexError):
    """A system parameter sits on (or too close to) a pole of the model."""


class NonConvergence(OdexError):
    """An iterative scheme failed to reach its tolerance within the
    iteration budget."""


class StepUnderflow(OdexError):
    """Adaptive step size shrank below the resolvable fraction of the span."""


class MaxStepsExceeded(OdexError):
    """Adaptive integrator exceeded its step budget."""


class ConfigError(OdexError):
    """Invalid or inconsistent experiment configuration."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ParseError(OdexError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
