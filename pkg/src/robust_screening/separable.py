"""Separate selling: the optimal one-dimensional robust mechanism per item.

Each item runs the single-item competitive-ratio optimal mechanism on its own
support; the joint ratio is the worst weighted average of the per-item ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .model import Instance, ItemPriceLaw, Mechanism, PriceLaw, validate_instance


def _single_ratio(lower: float, upper: float) -> float:
    if lower == 0.0:
        return 0.0
    return 1.0 / (1.0 + math.log(upper / lower))


@dataclass(frozen=True)
class SingleItemMechanism:
    """Optimal robust mechanism for one item with valuation in ``[lower, upper]``.

    Allocation ``(1 + ln(v/lower)) * ratio`` and payment ``v * ratio``; with a
    zero lower bound no positive ratio is attainable and both collapse to 0.
    """

    lower: float
    upper: float
    ratio: float

    def allocation(self, v):
        v = np.asarray(v, dtype=float)
        if self.lower == 0.0:
            return np.zeros_like(v)
        return (1.0 + np.log(v / self.lower)) * self.ratio

    def payment(self, v):
        return np.asarray(v, dtype=float) * self.ratio

    def price_law(self) -> ItemPriceLaw:
        """Density ``ratio / p`` on ``[lower, upper]`` plus an atom of mass ``ratio`` at ``lower``."""
        if self.lower == 0.0:
            return ItemPriceLaw(0.0, self.upper, 0.0, self.upper, 0.0)
        return ItemPriceLaw(self.lower, self.upper, self.ratio, self.lower, self.ratio)


def single_item(lower: float, upper: float) -> SingleItemMechanism:
    inst = Instance.from_bounds([(lower, upper)])
    lo, hi = float(inst.lower[0]), float(inst.upper[0])
    return SingleItemMechanism(lo, hi, _single_ratio(lo, hi))


def item_ratios(instance: Instance) -> np.ndarray:
    return np.array([_single_ratio(it.lower, it.upper) for it in instance.items])


class SeparableMechanism(Mechanism):
    def __init__(self, instance: Instance):
        self.instance = validate_instance(instance)
        self.n_items = self.instance.n_items
        self.parts = [single_item(it.lower, it.upper) for it in self.instance.items]
        self.ratios = np.array([p.ratio for p in self.parts])

    def allocation(self, v):
        v = np.atleast_2d(np.asarray(v, dtype=float))
        return np.column_stack([p.allocation(v[:, j]) for j, p in enumerate(self.parts)])

    def payment(self, v):
        v = np.atleast_2d(np.asarray(v, dtype=float))
        return v @ self.ratios

    def price_law(self) -> PriceLaw:
        return PriceLaw(tuple(p.price_law() for p in self.parts))


def joint_ratio(instance: Instance) -> tuple[float, int]:
    """Competitive ratio of separate selling and the split index achieving it.

    Items are sorted by increasing ``lower/upper``; nature sets the first
    ``split`` items (in that order) at their upper bounds and the rest at
    their lower bounds.  The returned split is 1-based in the sorted order, as
    in ``v = (upper_1..upper_{split-1}, lower_split..lower_J)``; for a single
    item it is 1.
    """
    instance = validate_instance(instance)
    r = item_ratios(instance)
    if instance.n_items == 1:
        return float(r[0]), 1
    order = instance.ratio_order()
    r, lo, hi = r[order], instance.lower[order], instance.upper[order]
    best, arg = math.inf, 2
    for j in range(1, instance.n_items):
        num = np.dot(r[:j], hi[:j]) + np.dot(r[j:], lo[j:])
        den = hi[:j].sum() + lo[j:].sum()
        val = num / den
        if val < best:
            best, arg = float(val), j + 1
    return best, arg


def worst_case_valuation(instance: Instance) -> np.ndarray:
    """The corner of ``V`` where separate selling attains :func:`joint_ratio`, in caller order."""
    instance = validate_instance(instance)
    _, split = joint_ratio(instance)
    order = instance.ratio_order()
    v = instance.lower.copy()
    v[order[: split - 1]] = instance.upper[order[: split - 1]]
    return v


def separable_ratio_zero_lower(instance: Instance) -> float:
    """Closed-form separate-selling ratio when exactly one item has a positive lower bound."""
    instance = validate_instance(instance)
    pos = np.flatnonzero(instance.lower > 0)
    if pos.size != 1:
        raise ShapeMismatch("exactly one item must have a positive lower bound")
    k = int(pos[0])
    others = np.delete(instance.upper, k).sum()
    r = _single_ratio(instance.lower[k], instance.upper[k])
    return float(r / (others / instance.lower[k] + 1.0))
