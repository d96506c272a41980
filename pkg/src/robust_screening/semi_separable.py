"""Threshold semi-separable mechanisms ``M_gamma`` and the optimal parameter.

For a threshold parameter ``gamma`` in ``[0, 1]`` each item ``j`` is sold by
the one-dimensional rule

    q_j(v_j) = (gamma * ln(v_j / upper_j) + 1)^+

with the payment that makes it incentive compatible and leaves zero utility
at the bottom of the item's support.  Items whose relative range is wide,
``ln(lower_j/upper_j) < -1/gamma`` (the *active set*), are never sold below
the threshold ``exp(-1/gamma) * upper_j``.

The best parameter ``gamma*`` is the unique root of the increasing function
:func:`phi`, and ``gamma*`` is also the competitive ratio of ``M_{gamma*}``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInstance, DomainError, ShapeMismatch
from .model import Instance, ItemPriceLaw, Mechanism, PriceLaw, validate_instance
from .scalar import RootResult, bisect_root, lambert_w0
from .separable import _single_ratio

# Relative tolerance of the active-set test; ties go to the inactive branch.
MEMBERSHIP_RTOL = 1e-12
# Left end of the root bracket; phi(GAMMA_FLOOR) < 0 whenever some lower bound is positive.
GAMMA_FLOOR = 1e-9
GAMMA_TOL = 1e-14


def _check_gamma(gamma: float, allow_zero: bool = True) -> float:
    gamma = float(gamma)
    if not (0.0 <= gamma <= 1.0) or (gamma == 0.0 and not allow_zero):
        raise DomainError(f"gamma must lie in {'[0, 1]' if allow_zero else '(0, 1]'}, got {gamma}")
    return gamma


def active_set(gamma: float, instance: Instance) -> np.ndarray:
    """Boolean mask of items with ``ln(lower/upper) < -1/gamma``.

    Zero lower bounds are always active; at ``gamma == 0`` nothing else is.
    """
    instance = validate_instance(instance) if not isinstance(instance, Instance) else instance
    mask = instance.zero_lower.copy()
    if gamma > 0:
        pos = ~mask
        mask[pos] = gamma * instance.log_range[pos] + 1.0 < -MEMBERSHIP_RTOL
    return mask


def _phi_masked(gamma: float, instance: Instance, active: np.ndarray) -> float:
    lo, hi, lr = instance.lower, instance.upper, instance.log_range
    gain = gamma * math.exp(-1.0 / gamma) * float(hi[active].sum()) if gamma > 0 else 0.0
    rest = ~active
    loss = float(np.sum(lo[rest] * (gamma * lr[rest] - gamma + 1.0)))
    return gain - loss


def phi(gamma: float, instance: Instance) -> float:
    """``gamma e^{-1/gamma} sum_{S} upper_j - sum_{not S} lower_j (gamma ln(lower_j/upper_j) - gamma + 1)``."""
    gamma = float(gamma)
    if not (0.0 < gamma <= 1.0):
        raise DomainError(f"phi is defined for gamma in (0, 1], got {gamma}")
    return _phi_masked(gamma, instance, active_set(gamma, instance))


class _PhiEvaluator:
    """Scalar-loop version of :func:`phi` for the root search on small instances."""

    def __init__(self, instance: Instance):
        self.rows = [
            (it.lower, it.upper, math.log(it.lower / it.upper) if it.lower > 0 else None)
            for it in instance.items
        ]

    def __call__(self, gamma: float) -> float:
        e = math.exp(-1.0 / gamma)
        total = 0.0
        for lo, hi, lr in self.rows:
            if lr is None or gamma * lr + 1.0 < -MEMBERSHIP_RTOL:
                total += gamma * e * hi
            else:
                total -= lo * (gamma * lr - gamma + 1.0)
        return total


@dataclass(frozen=True)
class GammaSolution:
    gamma_star: float
    active_set: frozenset[int]
    phi_residual: float
    iterations: int
    degenerate: bool = False
    bracket: tuple[float, float] = (0.0, 0.0)
    order: tuple[int, ...] = field(default=())


def solve_gamma_star(instance: Instance, tol: float = GAMMA_TOL) -> GammaSolution:
    """Root of :func:`phi` on ``(0, 1]`` by bisection.

    With every lower bound zero no positive ratio is possible; the solution is
    ``gamma* = 0`` flagged ``degenerate`` (and a warning is emitted).
    """
    instance = validate_instance(instance)
    order = tuple(int(k) for k in instance.ratio_order())
    if instance.degenerate:
        warnings.warn("all lower bounds are zero: optimal ratio is 0", RuntimeWarning, stacklevel=2)
        return GammaSolution(0.0, frozenset(range(instance.n_items)), 0.0, 0, True, (0.0, 0.0), order)
    f = _PhiEvaluator(instance) if instance.n_items <= 32 else (lambda g: phi(g, instance))
    top = f(1.0)
    if top < 0:
        # cannot happen for a valid instance; kept as a numerical guard
        warnings.warn(f"phi(1) = {top:g} < 0; returning gamma* = 1", RuntimeWarning, stacklevel=2)
        res = RootResult(1.0, 0, (1.0, 1.0), top)
    else:
        res = bisect_root(f, GAMMA_FLOOR, 1.0, tol=tol)
    g = res.root
    active = frozenset(int(k) for k in np.flatnonzero(active_set(g, instance)))
    return GammaSolution(g, active, phi(g, instance), res.iterations, False, res.bracket, order)


def _item_payments(gamma: float, instance: Instance, v: np.ndarray) -> np.ndarray:
    """Per-item payments, shape (N, J)."""
    active = active_set(gamma, instance)
    lo, hi, lr = instance.lower, instance.upper, instance.log_range
    out = np.empty_like(v)
    e = math.exp(-1.0 / gamma) if gamma > 0 else 0.0
    for j in range(instance.n_items):
        col = out[:, j]
        if active[j]:
            if gamma == 0.0:
                col[:] = 0.0
            else:
                np.subtract(v[:, j], e * hi[j], out=col)
                np.maximum(col, 0.0, out=col)
                col *= gamma
        else:
            np.multiply(v[:, j], gamma, out=col)
            col += lo[j] * (gamma * (lr[j] - 1.0) + 1.0)
    return out


def _item_allocations(gamma: float, instance: Instance, v: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        q = np.maximum(gamma * np.log(v / instance.upper) + 1.0, 0.0)
    if gamma == 0.0:
        q[:, active_set(0.0, instance)] = 0.0
    return q


def allocation(gamma: float, instance: Instance, v) -> np.ndarray:
    """Allocation probabilities of ``M_gamma``; shape follows ``v`` (one profile or a batch)."""
    gamma = _check_gamma(gamma)
    instance = validate_instance(instance)
    arr = instance.check_valuations(v)
    q = _item_allocations(gamma, instance, arr)
    return q[0] if np.ndim(v) == 1 else q


def payment(gamma: float, instance: Instance, v):
    """Total payment of ``M_gamma``: a float for one profile, an array for a batch."""
    gamma = _check_gamma(gamma)
    instance = validate_instance(instance)
    arr = instance.check_valuations(v)
    t = _item_payments(gamma, instance, arr).sum(axis=1)
    return float(t[0]) if np.ndim(v) == 1 else t


class SemiSeparableMechanism(Mechanism):
    """``M_gamma`` for a fixed instance, evaluated on batches without support checks."""

    def __init__(self, instance: Instance, gamma: float):
        self.instance = validate_instance(instance)
        self.gamma = _check_gamma(gamma)
        self.n_items = self.instance.n_items

    @classmethod
    def optimal(cls, instance: Instance, tol: float = GAMMA_TOL) -> SemiSeparableMechanism:
        return cls(instance, solve_gamma_star(instance, tol).gamma_star)

    def allocation(self, v):
        return _item_allocations(self.gamma, self.instance, np.atleast_2d(np.asarray(v, dtype=float)))

    def payment(self, v):
        t = _item_payments(self.gamma, self.instance, np.atleast_2d(np.asarray(v, dtype=float)))
        return t @ np.ones(self.n_items)

    def item_payments(self, v):
        return _item_payments(self.gamma, self.instance, np.atleast_2d(np.asarray(v, dtype=float)))

    def price_law(self) -> PriceLaw:
        return price_law(self.gamma, self.instance)


def worst_case_valuation(gamma: float, instance: Instance) -> np.ndarray:
    """Minimiser of ``payment / sum(v)`` for ``M_gamma`` over the support box.

    The sign of every partial derivative equals the sign of ``phi(gamma)``:
    if it is nonpositive nature moves to the upper corner, otherwise active
    items sit at their thresholds and the rest at their lower bounds.
    """
    gamma = _check_gamma(gamma)
    instance = validate_instance(instance)
    active = active_set(gamma, instance)
    sign = _phi_masked(gamma, instance, active) if gamma > 0 else -float(instance.lower.sum())
    if sign <= 0:
        return instance.upper.copy()
    v = instance.lower.copy()
    v[active] = math.exp(-1.0 / gamma) * instance.upper[active]
    return v


def worst_case_ratio(gamma: float, instance: Instance) -> tuple[float, np.ndarray]:
    """Competitive ratio of ``M_gamma`` and a valuation attaining it."""
    gamma = _check_gamma(gamma)
    instance = validate_instance(instance)
    v = worst_case_valuation(gamma, instance)
    total = float(v.sum())
    if total <= 0:
        raise DegenerateInstance("worst-case valuation has zero total value")
    t = float(_item_payments(gamma, instance, v[None, :]).sum())
    return t / total, v


def price_law(gamma: float, instance: Instance) -> PriceLaw:
    """Independent randomized posted prices implementing ``M_gamma``.

    Item ``j`` draws a price with density ``gamma/p`` on
    ``[max(lower_j, e^{-1/gamma} upper_j), upper_j]`` and, for inactive items,
    an atom ``1 + gamma ln(lower_j/upper_j)`` at ``lower_j``.
    """
    gamma = _check_gamma(gamma)
    instance = validate_instance(instance)
    active = active_set(gamma, instance)
    laws = []
    for j, it in enumerate(instance.items):
        if gamma == 0.0:
            if active[j]:
                laws.append(ItemPriceLaw(it.lower, it.upper, 0.0, it.upper, 0.0))
            else:
                laws.append(ItemPriceLaw(it.lower, it.upper, 0.0, it.lower, 1.0))
            continue
        if active[j]:
            start = math.exp(-1.0 / gamma) * it.upper
            laws.append(ItemPriceLaw(it.lower, it.upper, gamma, max(start, it.lower), 0.0))
        else:
            atom = max(0.0, 1.0 + gamma * float(instance.log_range[j]))
            laws.append(ItemPriceLaw(it.lower, it.upper, gamma, it.lower, atom))
    return PriceLaw(tuple(laws))


def two_item_closed_form(instance: Instance) -> tuple[float, int]:
    """Optimal ratio of a two-item instance in closed form, with the case used.

    Case 1 (the wide item is thresholded) uses the Lambert W function; case 2
    is the ``lower``-weighted harmonic combination of single-item ratios.
    Items are reordered internally so the first has the smaller ``lower/upper``.
    """
    instance = validate_instance(instance)
    if instance.n_items != 2:
        raise ShapeMismatch(f"two_item_closed_form needs exactly 2 items, got {instance.n_items}")
    a, b = (instance.items[k] for k in instance.ratio_order())
    if b.lower == 0.0:
        return 0.0, 1
    if a.lower == 0.0:
        case1 = True
    else:
        case1 = math.log(b.lower * a.upper / (b.upper * a.lower)) - 1.0 > a.lower / b.lower
    if case1:
        w = lambert_w0(a.upper / (math.e * b.upper))
        return 1.0 / (w + math.log(b.upper / b.lower) + 1.0), 1
    num = a.lower + b.lower
    den = a.lower * (1.0 + math.log(a.upper / a.lower)) + b.lower * (1.0 + math.log(b.upper / b.lower))
    return num / den, 2


def _single_positive(instance: Instance) -> int:
    pos = np.flatnonzero(instance.lower > 0)
    if pos.size != 1:
        raise ShapeMismatch("exactly one item must have a positive lower bound")
    return int(pos[0])


def zero_lower_ratio(instance: Instance) -> float:
    """Closed-form optimal ratio when exactly one item has a positive lower bound."""
    instance = validate_instance(instance)
    k = _single_positive(instance)
    rest = float(np.delete(instance.upper, k).sum())
    r = _single_ratio(instance.lower[k], instance.upper[k])
    return 1.0 / (1.0 / r + lambert_w0(rest / (math.e * instance.upper[k])))


def gap_vs_separable(instance: Instance) -> float:
    """Separate-selling ratio divided by the optimal ratio, one positive lower bound.

    Tends to zero as the other items' total upper bound grows relative to the
    positive lower bound.
    """
    instance = validate_instance(instance)
    k = _single_positive(instance)
    rest = float(np.delete(instance.upper, k).sum())
    r = _single_ratio(instance.lower[k], instance.upper[k])
    return (1.0 + r * lambert_w0(rest / (math.e * instance.upper[k]))) / (1.0 + rest / instance.lower[k])
