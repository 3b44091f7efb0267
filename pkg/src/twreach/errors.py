"""Exception taxonomy shared across the engine.

The CLI maps these onto exit codes: configuration problems are exit 2,
numerical failures exit 3, inconclusive or budget-limited runs exit 1.
"""


class TwreachError(Exception):
    """Base class for engine errors."""


class ConfigurationError(TwreachError):
    """Bad wiring, parameters, or input files."""


class DomainError(TwreachError):
    """Arguments outside an operation's domain (non-finite state, bad range)."""


class NumericalError(TwreachError):
    """Linear algebra or iteration failure (singular system, no convergence)."""


class DivergenceError(NumericalError):
    """State became non-finite during integration."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ToleranceError(NumericalError):
    """Requested enclosure diameter unattainable at the minimum step size."""


class ResourceError(TwreachError):
    """Work estimate exceeds the configured budget."""
