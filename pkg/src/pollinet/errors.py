"""Exception types raised across the package."""


class PollinetError(Exception):
    pass


class ConfigError(PollinetError, ValueError):
    """Invalid configuration or model specification."""


class DomainError(PollinetError, ValueError):
    """Argument outside the domain of a rate function."""


class NoViableWindow(PollinetError):
    """The plant growth rate is never positive."""


class AbsorbedAtZero(PollinetError):
    """All event rates vanished; the stochastic process is absorbed."""


class RuntimeBudgetExceeded(PollinetError):
    """Event cap reached.  ``partial`` holds what was simulated so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class StiffnessError(PollinetError):
    """Adaptive step size fell below the underflow threshold."""


class AlignmentError(PollinetError, ValueError):
    """Trajectories sampled on different time grids."""


class AmbiguousRoot(PollinetError):
    """More than one sign change where a unique root was required."""
