"""Compositional design-space exploration for multi-component hardware accelerators."""

from cosmos.errors import (
    ConfigError,
    CosmosError,
    DeadlockError,
    MappingError,
    PlanningError,
    TableLookupError,
    UsageError,
)
from cosmos.model import (
    ComponentDescriptor,
    DesignPoint,
    KnobSetting,
    Region,
    SynthesisResult,
    dominates,
    mismatch,
    pareto_filter,
    span,
)

__version__ = "0.1.0"

__all__ = [
    "ComponentDescriptor",
    "ConfigError",
    "CosmosError",
    "DeadlockError",
    "DesignPoint",
    "KnobSetting",
    "MappingError",
    "PlanningError",
    "Region",
    "SynthesisResult",
    "TableLookupError",
    "UsageError",
    "dominates",
    "mismatch",
    "pareto_filter",
    "span",
]
