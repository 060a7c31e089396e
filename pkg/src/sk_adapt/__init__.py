"""Stochastic knapsack adaptivity toolkit: policies, exact oracles, worst-case
families and the constants behind the approximation guarantees."""

from .model import (
    DiscreteDist,
    Instance,
    Item,
    NonAdaptivePlan,
    Policy,
    SizeLimitError,
    TreePolicy,
    Variant,
    make_instance,
)

__all__ = [
    "DiscreteDist",
    "Instance",
    "Item",
    "NonAdaptivePlan",
    "Policy",
    "SizeLimitError",
    "TreePolicy",
    "Variant",
    "make_instance",
]
