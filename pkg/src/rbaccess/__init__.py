"""Belief-based resource-block random access for sliced vehicular M2M networks."""

__version__ = "0.1.0"

from rbaccess.errors import (
    BeliefDegeneracyError,
    ConfigurationError,
    GridSizeError,
    SetupError,
    UsageError,
)

__all__ = [
    "BeliefDegeneracyError",
    "ConfigurationError",
    "GridSizeError",
    "SetupError",
    "UsageError",
    "__version__",
]
