"""Domain types: instances, quotes, price laws, partitions and collections.

All types are immutable.  Numeric arrays exposed by an :class:`Instance` are
read-only views so instances can be shared freely between threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyInstance,
    LowerExceedsUpper,
    NonPositiveUpper,
    OutOfSupport,
    OverlappingBundles,
    ScreeningError,
    UncoveredItem,
)

# Relative slack when deciding whether a valuation lies in the support box.
SUPPORT_RTOL = 1e-12


@dataclass(frozen=True)
class Item:
    name: str
    lower: float
    upper: float


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Instance:
    """Support box ``V = prod_j [lower_j, upper_j]`` of the buyer's valuations.

    Items keep the caller's order.  :meth:`ratio_order` gives the stable
    permutation sorting items by increasing ``lower/upper``.
    """

    items: tuple[Item, ...]

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise EmptyInstance("an instance needs at least one item")
        clean = []
        for k, it in enumerate(items):
            if not isinstance(it, Item):
                it = Item(*it) if len(it) == 3 else Item(f"item{k}", *it)
            lo, hi = float(it.lower), float(it.upper)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ScreeningError(f"item {it.name!r}: bounds must be finite")
            if hi <= 0:
                raise NonPositiveUpper(f"item {it.name!r}: upper bound {hi} must be > 0")
            if lo < 0:
                raise ScreeningError(f"item {it.name!r}: lower bound {lo} must be >= 0")
            if lo > hi:
                raise LowerExceedsUpper(f"item {it.name!r}: lower {lo} exceeds upper {hi}")
            clean.append(Item(str(it.name), lo, hi))
        object.__setattr__(self, "items", tuple(clean))

    @classmethod
    def from_bounds(cls, bounds: Iterable[Sequence[float]], names: Sequence[str] | None = None) -> Instance:
        bounds = list(bounds)
        if names is None:
            names = [f"item{k}" for k in range(len(bounds))]
        return cls(tuple(Item(n, lo, hi) for n, (lo, hi) in zip(names, bounds)))

    def __len__(self) -> int:
        return len(self.items)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @cached_property
    def lower(self) -> np.ndarray:
        return _readonly(np.array([it.lower for it in self.items], dtype=float))

    @cached_property
    def upper(self) -> np.ndarray:
        return _readonly(np.array([it.upper for it in self.items], dtype=float))

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(it.name for it in self.items)

    @property
    def degenerate(self) -> bool:
        """True when no lower bound is positive; no mechanism then guarantees a positive ratio."""
        return bool(np.all(self.lower == 0.0))

    @cached_property
    def zero_lower(self) -> np.ndarray:
        return _readonly(self.lower == 0.0)

    @cached_property
    def log_range(self) -> np.ndarray:
        """``ln(lower/upper)``; entries for zero lower bounds are NaN, never -inf.

        Callers must branch on :attr:`zero_lower` before using these values.
        """
        out = np.full(self.n_items, np.nan)
        pos = ~self.zero_lower
        out[pos] = np.log(self.lower[pos] / self.upper[pos])
        return _readonly(out)

    def ratio_order(self) -> np.ndarray:
        """Stable permutation sorting items by increasing ``lower/upper``."""
        return np.argsort(self.lower / self.upper, kind="stable")

    def check_valuations(self, v) -> np.ndarray:
        """Return ``v`` as a float array of shape (N, J) after a support check."""
        arr = np.asarray(v, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.n_items:
            raise OutOfSupport(f"expected valuations with {self.n_items} entries, got shape {np.shape(v)}")
        slack = SUPPORT_RTOL * np.maximum(self.upper, 1.0)
        if np.any(arr < self.lower - slack) or np.any(arr > self.upper + slack):
            raise OutOfSupport("valuation outside the support box")
        return arr

    def to_dict(self) -> dict:
        return {"items": [{"name": it.name, "lower": it.lower, "upper": it.upper} for it in self.items]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Instance:
        try:
            raw = data["items"]
            items = tuple(
                Item(str(d.get("name", f"item{k}")), float(d["lower"]), float(d["upper"]))
                for k, d in enumerate(raw)
            )
        except (KeyError, TypeError) as exc:
            raise ScreeningError(f"malformed instance document: {exc}") from exc
        return cls(items)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> Instance:
        return cls.from_dict(json.loads(text))


def validate_instance(raw) -> Instance:
    """Build and validate an :class:`Instance` from an instance, dict, or list of bounds."""
    if isinstance(raw, Instance):
        return Instance(raw.items)
    if isinstance(raw, Mapping):
        return Instance.from_dict(raw)
    return Instance.from_bounds(raw)


@dataclass(frozen=True)
class MechanismQuote:
    """Allocation and payment quoted to one valuation profile.

    Construction checks the allocation range and individual rationality
    ``payment <= allocation . valuation``.
    """

    allocation: tuple[float, ...]
    payment: float
    valuation: tuple[float, ...]

    def __post_init__(self):
        q = np.asarray(self.allocation, dtype=float)
        v = np.asarray(self.valuation, dtype=float)
        if q.shape != v.shape:
            raise ScreeningError("allocation and valuation lengths differ")
        if np.any(q < -1e-12) or np.any(q > 1 + 1e-12):
            raise ScreeningError("allocation probabilities must lie in [0, 1]")
        if self.payment < -1e-12:
            raise ScreeningError("payment must be nonnegative")
        surplus = float(q @ v)
        if self.payment > surplus + 1e-9 * max(1.0, abs(surplus)):
            raise ScreeningError(f"quote violates IR: payment {self.payment} > value {surplus}")
        object.__setattr__(self, "allocation", tuple(float(x) for x in q))
        object.__setattr__(self, "valuation", tuple(float(x) for x in v))
        object.__setattr__(self, "payment", float(self.payment))

    @property
    def utility(self) -> float:
        return float(np.dot(self.allocation, self.valuation)) - self.payment


class Mechanism:
    """A direct mechanism evaluated on batches of valuations.

    Subclasses implement vectorised ``allocation(v)`` returning (N, J) and
    ``payment(v)`` returning (N,), for ``v`` of shape (N, J).
    """

    n_items: int

    def allocation(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def payment(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def ratio(self, v: np.ndarray) -> np.ndarray:
        v = np.atleast_2d(np.asarray(v, dtype=float))
        return self.payment(v) / v.sum(axis=1)

    def quote(self, v) -> MechanismQuote:
        v = np.asarray(v, dtype=float)
        q = self.allocation(v[None, :])[0]
        t = float(self.payment(v[None, :])[0])
        return MechanismQuote(tuple(q), t, tuple(v))


class FunctionMechanism(Mechanism):
    """Mechanism defined by two vectorised callables; handy for baselines and planted faults."""

    def __init__(self, n_items: int, allocation: Callable, payment: Callable):
        self.n_items = n_items
        self._alloc = allocation
        self._pay = payment

    def allocation(self, v):
        return np.asarray(self._alloc(np.atleast_2d(v)), dtype=float)

    def payment(self, v):
        return np.asarray(self._pay(np.atleast_2d(v)), dtype=float)


class PostedPriceMechanism(Mechanism):
    """Deterministic per-item posted prices: item ``j`` sells iff ``v_j >= price_j``."""

    def __init__(self, prices):
        self.prices = np.asarray(prices, dtype=float)
        self.n_items = self.prices.size

    def allocation(self, v):
        v = np.atleast_2d(v)
        # ties sell: the buyer is indifferent and the seller's best response breaks them this way
        return (v >= self.prices * (1 - 1e-12)).astype(float)

    def payment(self, v):
        return self.allocation(v) @ self.prices


def zero_mechanism(n_items: int) -> FunctionMechanism:
    return FunctionMechanism(
        n_items,
        lambda v: np.zeros_like(v, dtype=float),
        lambda v: np.zeros(len(v)),
    )


@dataclass(frozen=True)
class ItemPriceLaw:
    """Randomized posted price for one item.

    Continuous density ``gamma / p`` on ``[start, upper]`` plus an atom of
    mass ``atom`` at ``lower``.  The remaining mass ``1 - atom - continuous``
    (only nonzero when ``gamma == 0`` on a zero-lower item) means "no sale".
    """

    lower: float
    upper: float
    gamma: float
    start: float
    atom: float

    @property
    def continuous_mass(self) -> float:
        if self.gamma == 0.0 or self.start >= self.upper:
            return 0.0
        return self.gamma * math.log(self.upper / self.start)

    @property
    def total_mass(self) -> float:
        return self.atom + self.continuous_mass

    def cdf(self, p) -> np.ndarray:
        """Probability that the posted price is at most ``p``; equals the allocation at valuation ``p``."""
        p = np.asarray(p, dtype=float)
        out = np.where(p >= self.lower, self.atom, 0.0)
        if self.continuous_mass > 0:
            inside = np.clip(p, self.start, self.upper)
            cont = self.gamma * np.log(inside / self.start)
            out = out + np.where(p >= self.start, cont, 0.0)
        return out

    def expected_payment(self, v) -> np.ndarray:
        """``E[price; price <= v]``, the payment of a buyer valuing the item at ``v``."""
        v = np.asarray(v, dtype=float)
        out = np.where(v >= self.lower, self.atom * self.lower, 0.0)
        if self.continuous_mass > 0:
            inside = np.clip(v, self.start, self.upper)
            out = out + np.where(v >= self.start, self.gamma * (inside - self.start), 0.0)
        return out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw prices; ``inf`` encodes the no-sale outcome."""
        u = rng.random(size)
        out = np.full(size, np.inf)
        out[u < self.atom] = self.lower
        cont = (u >= self.atom) & (u < self.total_mass)
        if np.any(cont):
            # invert atom + gamma*ln(p/start) = u
            out[cont] = self.start * np.exp((u[cont] - self.atom) / self.gamma)
        return out


@dataclass(frozen=True)
class PriceLaw:
    items: tuple[ItemPriceLaw, ...]

    def __len__(self):
        return len(self.items)

    def sample(self, size: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return np.column_stack([law.sample(rng, size) for law in self.items])

    def to_dict(self, names: Sequence[str] | None = None) -> dict:
        rows = []
        for k, law in enumerate(self.items):
            rows.append(
                {
                    "name": names[k] if names else f"item{k}",
                    "lower": law.lower,
                    "upper": law.upper,
                    "density_start": law.start,
                    "density_coefficient": law.gamma,
                    "continuous_mass": law.continuous_mass,
                    "atom_location": law.lower,
                    "atom_mass": law.atom,
                }
            )
        return {"items": rows}


@dataclass(frozen=True)
class Bundle:
    members: frozenset[int]
    lower: float
    upper: float

    def __post_init__(self):
        members = frozenset(int(m) for m in self.members)
        if not members:
            raise ScreeningError("bundles must be nonempty")
        if min(members) < 0:
            raise ScreeningError("member indices are 0-based and nonnegative")
        lo, hi = float(self.lower), float(self.upper)
        if hi <= 0:
            raise NonPositiveUpper(f"bundle {sorted(members)}: upper bound must be > 0")
        if lo < 0 or lo > hi:
            raise LowerExceedsUpper(f"bundle {sorted(members)}: need 0 <= lower <= upper")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def key(self) -> tuple[int, ...]:
        return tuple(sorted(self.members))

    def to_dict(self) -> dict:
        return {"members": list(self.key), "lower": self.lower, "upper": self.upper}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Bundle:
        try:
            return cls(frozenset(d["members"]), d["lower"], d["upper"])
        except (KeyError, TypeError) as exc:
            raise ScreeningError(f"malformed bundle entry: {exc}") from exc


def _infer_n_items(data: Mapping[str, Any], entries: Iterable[Bundle]) -> int:
    if "items" in data:
        return len(data["items"])
    if "n_items" in data:
        return int(data["n_items"])
    return max(max(b.members) for b in entries) + 1


@dataclass(frozen=True)
class PartitionSpec:
    """Bundles partitioning item indices ``0..n_items-1`` with bounds on each bundle sum."""

    bundles: tuple[Bundle, ...]
    n_items: int = field(default=-1)

    def __post_init__(self):
        bundles = tuple(self.bundles)
        if not bundles:
            raise EmptyInstance("a partition needs at least one bundle")
        n = self.n_items if self.n_items >= 0 else max(max(b.members) for b in bundles) + 1
        seen: set[int] = set()
        for b in bundles:
            if seen & b.members:
                raise OverlappingBundles(f"item(s) {sorted(seen & b.members)} appear in several bundles")
            seen |= b.members
        missing = set(range(n)) - seen
        if missing:
            raise UncoveredItem(f"item(s) {sorted(missing)} belong to no bundle")
        if max(seen) >= n:
            raise ScreeningError(f"member index {max(seen)} out of range for {n} items")
        object.__setattr__(self, "bundles", bundles)
        object.__setattr__(self, "n_items", n)

    @property
    def blocks(self) -> list[list[int]]:
        return [list(b.key) for b in self.bundles]

    def bundle_of(self) -> np.ndarray:
        """Array mapping each item index to the index of its bundle."""
        out = np.empty(self.n_items, dtype=int)
        for k, b in enumerate(self.bundles):
            out[list(b.members)] = k
        return out

    def to_instance(self) -> Instance:
        """Bundle-level box instance, one pseudo-item per bundle."""
        return Instance(
            tuple(Item("+".join(map(str, b.key)), b.lower, b.upper) for b in self.bundles)
        )

    @classmethod
    def finest(cls, instance: Instance) -> PartitionSpec:
        return cls(
            tuple(Bundle(frozenset([k]), it.lower, it.upper) for k, it in enumerate(instance.items)),
            instance.n_items,
        )

    def to_dict(self) -> dict:
        return {"n_items": self.n_items, "bundles": [b.to_dict() for b in self.bundles]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PartitionSpec:
        bundles = tuple(Bundle.from_dict(d) for d in data["bundles"])
        return cls(bundles, _infer_n_items(data, bundles))


@dataclass(frozen=True)
class CollectionSpec:
    """Arbitrary collection of item subsets with bounds on each subset sum."""

    subsets: tuple[Bundle, ...]
    n_items: int = field(default=-1)

    def __post_init__(self):
        subsets = tuple(self.subsets)
        if not subsets:
            raise EmptyInstance("a collection needs at least one subset")
        n = self.n_items if self.n_items >= 0 else max(max(b.members) for b in subsets) + 1
        if max(max(b.members) for b in subsets) >= n:
            raise ScreeningError("member index out of range")
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "n_items", n)

    def to_dict(self) -> dict:
        return {"n_items": self.n_items, "subsets": [b.to_dict() for b in self.subsets]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> CollectionSpec:
        subsets = tuple(Bundle.from_dict(d) for d in data["subsets"])
        return cls(subsets, _infer_n_items(data, subsets))
