from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import NAMED, bounds_strategy
from robust_screening import bundles as B
from robust_screening.errors import BundleSumOutOfRange, NoPartitionExists, TooLarge
from robust_screening.model import Bundle, CollectionSpec, Instance, PartitionSpec
from robust_screening.semi_separable import solve_gamma_star
from robust_screening.verify import check_ic_ir

TWO_BUNDLES = {
    "bundles": [{"members": [0, 1], "lower": 2, "upper": 4}, {"members": [2], "lower": 1, "upper": 2}]
}


def collection(members, bounds=None):
    bounds = bounds or [(1.0, 2.0)] * len(members)
    return CollectionSpec(tuple(Bundle(frozenset(m), lo, hi) for m, (lo, hi) in zip(members, bounds)))


class TestSolve:
    def test_finest_partition_matches_items(self):
        inst = Instance.from_bounds(NAMED["intro"])
        sol = B.solve_partition(PartitionSpec.finest(inst))
        assert sol.gamma_star_B == solve_gamma_star(inst).gamma_star

    @settings(max_examples=100, deadline=None)
    @given(bounds_strategy(max_items=5, allow_zero=True))
    def test_finest_partition_property(self, bounds):
        inst = Instance.from_bounds(bounds)
        assert abs(B.solve_partition(PartitionSpec.finest(inst)).gamma_star_B - solve_gamma_star(inst).gamma_star) <= 1e-12

    def test_two_bundle_example(self):
        sol = B.solve_partition(TWO_BUNDLES)
        assert sol.gamma_star_B == solve_gamma_star(Instance.from_bounds([(2, 4), (1, 2)])).gamma_star
        assert sol.gamma_star_B == pytest.approx(1 / (1 + math.log(2)), abs=1e-12)
        assert sol.price_law.items[0].total_mass == pytest.approx(1.0)

    def test_single_bundle(self):
        sol = B.solve_partition({"bundles": [{"members": [0, 1, 2], "lower": 1.5, "upper": 9}]})
        assert sol.gamma_star_B == pytest.approx(1 / (1 + math.log(6)), abs=1e-12)


class TestQuote:
    def test_upper_sums_allocate_everything(self):
        sol = B.solve_partition(TWO_BUNDLES)
        q = B.bundle_quote(sol, [3.0, 1.0, 2.0])
        assert q.allocation == pytest.approx((1.0, 1.0, 1.0))

    def test_lower_sums(self):
        sol = B.solve_partition(TWO_BUNDLES)
        g = sol.gamma_star_B
        q = B.bundle_quote(sol, [1.0, 1.0, 1.0])
        expected = 2 * (g * math.log(0.5) + 1) + 1 * (g * math.log(0.5) + 1)
        assert q.payment == pytest.approx(expected, abs=1e-14)
        assert q.allocation[0] == q.allocation[1]

    def test_threshold_bundle(self):
        part = {"bundles": [{"members": [0, 1], "lower": 0.01, "upper": 2}, {"members": [2], "lower": 1, "upper": 2}]}
        sol = B.solve_partition(part)
        assert sol.active_bundles == frozenset({0})
        thr = 2 * math.exp(-1 / sol.gamma_star_B)
        mech = B.BundleMechanism(sol)
        v = np.array([[thr / 2, thr / 2, 1.0]])
        assert mech.allocation(v)[0, 0] == pytest.approx(0.0, abs=1e-14)
        q = B.bundle_quote(sol, v[0])
        assert q.payment == pytest.approx(1 * (sol.gamma_star_B * math.log(0.5) + 1), abs=1e-14)

    def test_out_of_range(self):
        sol = B.solve_partition(TWO_BUNDLES)
        with pytest.raises(BundleSumOutOfRange):
            B.bundle_quote(sol, [3.0, 3.0, 1.0])

    def test_items_outside_boxes_allowed(self):
        # only sums are constrained: an item may carry the whole bundle value
        sol = B.solve_partition(TWO_BUNDLES)
        B.bundle_quote(sol, [4.0, 0.0, 1.5])

    def test_ic_ir_on_item_grid(self):
        sol = B.solve_partition(TWO_BUNDLES)
        mech = B.BundleMechanism(sol)
        # items in [1, 2] x [1, 2] x [1, 2] keep every bundle sum in range
        ic, ir = check_ic_ir(mech, Instance.from_bounds([(1, 2), (1, 2), (1, 2)]), 12)
        assert ic <= 1e-10 and ir <= 1e-10


class TestEnumerate:
    def test_documented_example(self):
        c = collection([[0], [1], [2], [0, 1], [1, 2], [0, 1, 2]])
        parts = B.enumerate_partitions(c)
        assert [p.blocks for p in parts] == [[[0], [1], [2]], [[0, 1], [2]], [[0], [1, 2]], [[0, 1, 2]]]

    def test_trivial(self):
        assert len(B.enumerate_partitions(collection([[0], [1]]))) == 1
        c = CollectionSpec((Bundle(frozenset({0, 1}), 1, 2),), n_items=3)
        assert B.enumerate_partitions(c) == []

    def test_duplicates_keep_tighter_bounds(self):
        c = collection([[0], [0], [1]], [(1, 5), (2, 4), (1, 2)])
        parts = B.enumerate_partitions(c)
        assert len(parts) == 1
        assert (parts[0].bundles[0].lower, parts[0].bundles[0].upper) == (2, 4)

    def test_guard(self):
        subsets = [[k] for k in range(16)] + [[k, k + 1] for k in range(15)]
        with pytest.raises(TooLarge):
            B.enumerate_partitions(collection(subsets))

    def test_exact_covers_against_brute_force(self):
        members = [[0], [1], [2], [3], [0, 1], [2, 3], [1, 2], [0, 1, 2], [3], [0, 3]]
        c = collection(members)
        parts = B.enumerate_partitions(c)
        # brute force over subsets of the deduplicated collection
        uniq = sorted({tuple(m) for m in members})
        brute = set()
        for mask in range(1, 1 << len(uniq)):
            chosen = [uniq[k] for k in range(len(uniq)) if mask >> k & 1]
            flat = [i for s in chosen for i in s]
            if sorted(flat) == [0, 1, 2, 3]:
                brute.add(tuple(sorted(chosen)))
        assert {tuple(tuple(b) for b in p.blocks) for p in parts} == brute
        assert len(parts) == len(brute)


class TestBest:
    def test_finest_only(self):
        c = collection([[0], [1], [2]], [(1, 3), (2, 5), (1, 2)])
        best, cands = B.best_partition(c)
        assert best.partition.blocks == [[0], [1], [2]]
        assert len(cands) == 1

    def test_tight_pair_wins(self):
        c = collection(
            [[0], [1], [2], [0, 1], [1, 2], [0, 1, 2]],
            [(1, 4), (1, 4), (1, 4), (3.5, 4), (2, 8), (3, 12)],
        )
        best, cands = B.best_partition(c)
        assert best.partition.blocks == [[0, 1], [2]]
        assert all(best.gamma_star_B >= g for _, g in cands)
        assert len(cands) == 4

    def test_ties_prefer_fewer_bundles(self):
        # every partition has the same box shape, so all ratios tie
        c = collection([[0], [1], [0, 1]], [(1, 2), (1, 2), (2, 4)])
        best, cands = B.best_partition(c)
        assert {round(g, 12) for _, g in cands} == {round(cands[0][1], 12)}
        assert best.partition.blocks == [[0, 1]]

    def test_no_partition(self):
        c = CollectionSpec((Bundle(frozenset({0, 1}), 1, 2), Bundle(frozenset({1, 2}), 1, 2)))
        with pytest.raises(NoPartitionExists):
            B.best_partition(c)
