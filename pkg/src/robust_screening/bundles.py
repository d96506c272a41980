"""Semi-separable selling over bundles.

When the seller only knows bounds on sums of valuations over groups of items,
each group of a partition is treated as a single pseudo-item: the group sum
drives a shared allocation ``(gamma ln(sum/upper_b) + 1)^+`` and a one-dimensional
payment, exactly as ``M_gamma`` does for a single item.  Given a collection of
bounded subsets, every exact cover is a candidate partition and the best one
yields a guaranteed ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BundleSumOutOfRange, NoPartitionExists, TooLarge
from .model import Bundle, CollectionSpec, Mechanism, MechanismQuote, PartitionSpec, PriceLaw
from .semi_separable import GammaSolution, _item_allocations, _item_payments, price_law, solve_gamma_star

MAX_SUBSETS = 20
MAX_ITEMS = 15
TIE_TOL = 1e-12


@dataclass(frozen=True)
class BundleSolution:
    partition: PartitionSpec
    gamma_star_B: float
    active_bundles: frozenset[int]
    price_law: PriceLaw
    solution: GammaSolution

    def to_dict(self) -> dict:
        return {
            "partition": self.partition.blocks,
            "gamma": self.gamma_star_B,
            "active_bundles": sorted(self.active_bundles),
            "degenerate": self.solution.degenerate,
        }


def _as_partition(partition) -> PartitionSpec:
    return partition if isinstance(partition, PartitionSpec) else PartitionSpec.from_dict(partition)


def solve_partition(partition) -> BundleSolution:
    """Optimal threshold parameter for the bundle-level box of a partition."""
    partition = _as_partition(partition)
    inst = partition.to_instance()
    sol = solve_gamma_star(inst)
    g = sol.gamma_star
    return BundleSolution(partition, g, sol.active_set, price_law(g, inst), sol)


class BundleMechanism(Mechanism):
    """Vectorised generalized mechanism; inputs are item-level valuations (N, n_items)."""

    def __init__(self, solution: BundleSolution):
        self.solution = solution
        self.n_items = solution.partition.n_items
        self.bundle_instance = solution.partition.to_instance()
        self.membership = np.zeros((self.n_items, len(solution.partition.bundles)))
        self.membership[np.arange(self.n_items), solution.partition.bundle_of()] = 1.0

    def bundle_sums(self, v) -> np.ndarray:
        return np.atleast_2d(np.asarray(v, dtype=float)) @ self.membership

    def allocation(self, v):
        q_b = _item_allocations(self.solution.gamma_star_B, self.bundle_instance, self.bundle_sums(v))
        return q_b @ self.membership.T

    def payment(self, v):
        s = self.bundle_sums(v)
        return _item_payments(self.solution.gamma_star_B, self.bundle_instance, s).sum(axis=1)


def bundle_quote(solution: BundleSolution, v) -> MechanismQuote:
    """Quote for one item-level profile whose bundle sums lie within their bounds."""
    mech = BundleMechanism(solution)
    v = np.asarray(v, dtype=float)
    s = mech.bundle_sums(v)[0]
    inst = mech.bundle_instance
    slack = 1e-12 * inst.upper
    bad = (s < inst.lower - slack) | (s > inst.upper + slack)
    if v.shape != (mech.n_items,) or np.any(bad):
        raise BundleSumOutOfRange(f"bundle sums {s.tolist()} outside their bounds")
    return mech.quote(v)


def _dedupe(subsets) -> list[Bundle]:
    merged: dict[tuple[int, ...], Bundle] = {}
    for b in subsets:
        if b.key in merged:
            old = merged[b.key]
            b = Bundle(b.members, max(old.lower, b.lower), min(old.upper, b.upper))
        merged[b.key] = b
    return list(merged.values())


def enumerate_partitions(collection) -> list[PartitionSpec]:
    """All exact covers of the items by subsets of the collection.

    Depth-first search branching on the uncovered item with the fewest
    remaining candidate subsets (ties: highest item index), candidates tried in
    collection order.  Bundles inside each partition are listed by smallest member.
    """
    if not isinstance(collection, CollectionSpec):
        collection = CollectionSpec.from_dict(collection)
    subsets = _dedupe(collection.subsets)
    n = collection.n_items
    if len(subsets) > MAX_SUBSETS and n > MAX_ITEMS:
        raise TooLarge(f"{len(subsets)} subsets over {n} items exceeds the enumeration guard")
    containing = [[k for k, b in enumerate(subsets) if j in b.members] for j in range(n)]
    found: list[PartitionSpec] = []

    def search(covered: frozenset[int], chosen: list[int]) -> None:
        if len(covered) == n:
            parts = sorted((subsets[k] for k in chosen), key=lambda b: b.key)
            found.append(PartitionSpec(tuple(parts), n))
            return
        best_item, best_cands = -1, None
        for j in range(n):
            if j in covered:
                continue
            cands = [k for k in containing[j] if not (subsets[k].members & covered)]
            if best_cands is None or len(cands) <= len(best_cands):
                best_item, best_cands = j, cands
        for k in best_cands:
            search(covered | subsets[k].members, chosen + [k])

    search(frozenset(), [])
    return found


def best_partition(collection) -> tuple[BundleSolution, list[tuple[PartitionSpec, float]]]:
    """Partition with the largest bundle-level ratio, plus every candidate's value.

    Values within ``TIE_TOL`` of the best count as ties, resolved toward fewer
    bundles and then lexicographically smallest block list.
    """
    parts = enumerate_partitions(collection)
    if not parts:
        raise NoPartitionExists("no sub-collection partitions the item set")
    solved = [solve_partition(p) for p in parts]
    top = max(s.gamma_star_B for s in solved)
    tied = [s for s in solved if s.gamma_star_B >= top - TIE_TOL]
    best = min(tied, key=lambda s: (len(s.partition.bundles), s.partition.blocks))
    candidates = [(s.partition, s.gamma_star_B) for s in solved]
    assert all(best.gamma_star_B >= g - TIE_TOL for _, g in candidates)
    return best, candidates
