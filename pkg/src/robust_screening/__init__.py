"""Robust multi-item screening: separate selling, threshold semi-separable mechanisms,
nature's worst-case distributions, bundles and numerical certificates."""

from .errors import ScreeningError
from .model import CollectionSpec, Instance, Item, MechanismQuote, PartitionSpec, PriceLaw
from .semi_separable import GammaSolution, SemiSeparableMechanism, solve_gamma_star
from .separable import SeparableMechanism, joint_ratio, single_item

__all__ = [
    "CollectionSpec",
    "GammaSolution",
    "Instance",
    "Item",
    "MechanismQuote",
    "PartitionSpec",
    "PriceLaw",
    "ScreeningError",
    "SemiSeparableMechanism",
    "SeparableMechanism",
    "joint_ratio",
    "single_item",
    "solve_gamma_star",
]

__version__ = "0.1.0"
