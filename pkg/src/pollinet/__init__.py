"""Plant-pollinator network dynamics across scales.

Individual-based stochastic simulation, its large-population ODE limit,
Gaussian fluctuations around that limit, the trait-continuum kinetic limit
and the exact analysis of a single plant-pollinator pair.
"""

from .errors import (
    AbsorbedAtZero,
    AlignmentError,
    AmbiguousRoot,
    ConfigError,
    DomainError,
    NoViableWindow,
    PollinetError,
    RuntimeBudgetExceeded,
    StiffnessError,
)
from .network import Community, sample_community
from .rates import Kernel, RateParams
from .trajectory import Trajectory

__version__ = "0.1.0"

__all__ = [
    "AbsorbedAtZero",
    "AlignmentError",
    "AmbiguousRoot",
    "Community",
    "ConfigError",
    "DomainError",
    "Kernel",
    "NoViableWindow",
    "PollinetError",
    "RateParams",
    "RuntimeBudgetExceeded",
    "StiffnessError",
    "Trajectory",
    "sample_community",
]
