from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NAMED, bounds_strategy, gamma_oracle, phi_oracle, random_bounds, w0
from robust_screening.errors import DomainError, OutOfSupport, ShapeMismatch
from robust_screening.model import Instance
from robust_screening.semi_separable import (
    SemiSeparableMechanism,
    _phi_masked,
    active_set,
    allocation,
    gap_vs_separable,
    payment,
    phi,
    price_law,
    solve_gamma_star,
    two_item_closed_form,
    worst_case_ratio,
    zero_lower_ratio,
)
from robust_screening.separable import joint_ratio, separable_ratio_zero_lower

CASE1 = 1.0 / (w0(1 / math.e) + math.log(2) + 1)


def grid_min(gamma, bounds, points=400):
    """Oracle: brute-force ratio minimum on a dense log grid."""
    axes = [np.geomspace(max(lo, hi * 1e-6), hi, points) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    v = np.stack([m.ravel() for m in mesh], axis=1)
    inst = Instance.from_bounds(bounds)
    return float(np.min(SemiSeparableMechanism(inst, gamma).payment(v) / v.sum(axis=1)))


class TestPhi:
    def test_zero_at_e_ratio(self):
        assert phi(0.5, Instance.from_bounds([(1, math.e)])) == pytest.approx(0.0, abs=1e-15)

    def test_near_root_and_negative(self):
        assert abs(phi(0.5072, Instance.from_bounds(NAMED["wide_narrow"]))) < 1e-3
        assert phi(0.2, Instance.from_bounds(NAMED["equal_upper"])) < 0

    def test_domain(self):
        with pytest.raises(DomainError):
            phi(0.0, Instance.from_bounds([(1, 2)]))
        with pytest.raises(DomainError):
            phi(1.5, Instance.from_bounds([(1, 2)]))

    @settings(max_examples=200, deadline=None)
    @given(bounds_strategy(allow_zero=True), st.floats(0.01, 1.0))
    def test_matches_direct_formula(self, bounds, g):
        inst = Instance.from_bounds(bounds)
        assert phi(g, inst) == pytest.approx(phi_oracle(g, bounds), rel=1e-9, abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(bounds_strategy(allow_zero=True), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_monotone(self, bounds, a, b):
        inst = Instance.from_bounds(bounds)
        lo, hi = min(a, b), max(a, b)
        assert phi(lo, inst) <= phi(hi, inst) + 1e-12

    def test_zero_lower_always_active(self):
        inst = Instance.from_bounds([(0, 1), (0.9, 1)])
        assert active_set(1e-6, inst).tolist() == [True, False]
        assert active_set(0.0, inst).tolist() == [True, False]

    def test_continuity_at_transition(self):
        inst = Instance.from_bounds([(0.05, 1), (0.5, 1)])
        g = -1 / math.log(0.05)
        inside = np.array([True, False])
        outside = np.array([False, False])
        assert _phi_masked(g, inst, inside) == pytest.approx(_phi_masked(g, inst, outside), abs=1e-12)
        # ties go to the inactive branch
        assert not active_set(g, inst)[0]


class TestSolve:
    def test_single_item(self):
        sol = solve_gamma_star(Instance.from_bounds([(1, 100)]))
        assert sol.gamma_star == pytest.approx(1 / (1 + math.log(100)), abs=1e-12)
        assert sol.gamma_star == pytest.approx(0.1784, abs=5e-5)

    def test_named(self):
        sol = solve_gamma_star(Instance.from_bounds(NAMED["equal_upper"]))
        expected = 6 / (2 * (1 + math.log(6)) + 4 * (1 + math.log(3)))
        assert sol.gamma_star == pytest.approx(expected, abs=1e-12)
        assert sol.gamma_star == pytest.approx(0.42925, abs=5e-6)
        assert sol.active_set == frozenset()
        sol = solve_gamma_star(Instance.from_bounds(NAMED["wide_narrow"]))
        assert sol.gamma_star == pytest.approx(CASE1, abs=1e-12)
        assert sol.active_set == frozenset({0})

    def test_degenerate(self):
        with pytest.warns(RuntimeWarning):
            sol = solve_gamma_star(Instance.from_bounds([(0, 1), (0, 1)]))
        assert sol.gamma_star == 0.0 and sol.degenerate

    @settings(max_examples=200, deadline=None)
    @given(bounds_strategy(max_items=6, allow_zero=True))
    def test_matches_brent_oracle(self, bounds):
        sol = solve_gamma_star(Instance.from_bounds(bounds))
        assert sol.gamma_star == pytest.approx(gamma_oracle(bounds), abs=1e-12)
        lo, hi = sol.bracket
        assert hi - lo <= 1e-14

    def test_large_instance_uses_vector_path(self, rng):
        bounds = random_bounds(rng, 80)
        assert solve_gamma_star(Instance.from_bounds(bounds)).gamma_star == pytest.approx(gamma_oracle(bounds), abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(bounds_strategy(max_items=5, allow_zero=True))
    def test_dominates_separable(self, bounds):
        inst = Instance.from_bounds(bounds)
        assert solve_gamma_star(inst).gamma_star >= joint_ratio(inst)[0] - 1e-9


class TestMechanism:
    def test_allocation_points(self):
        inst = Instance.from_bounds(NAMED["wide_narrow"])
        g = 0.5072
        q = allocation(g, inst, [1.0, 1.0])
        assert q.tolist() == [1.0, 1.0]
        assert allocation(g, inst, [math.exp(-1 / g), 0.5])[0] == pytest.approx(0.0, abs=1e-15)
        assert allocation(g, inst, [1.0, 0.5])[1] == pytest.approx(0.5072 * math.log(0.5) + 1, abs=1e-12)

    def test_payment_cases(self):
        inst = Instance.from_bounds(NAMED["wide_narrow"])
        g = solve_gamma_star(inst).gamma_star
        thr = math.exp(-1 / g)
        # below threshold on the wide item, lower bound on the narrow one
        t = payment(g, inst, [thr * 0.5, 0.5])
        assert t == pytest.approx(0.5 * (g * math.log(0.5) + 1), abs=1e-14)
        with pytest.raises(OutOfSupport):
            payment(g, inst, [2.0, 0.5])

    def test_gamma_zero(self):
        inst = Instance.from_bounds([(0, 1), (0.5, 1)])
        assert allocation(0.0, inst, [0.3, 0.7]).tolist() == [0.0, 1.0]
        assert payment(0.0, inst, [0.3, 0.7]) == 0.5

    @settings(max_examples=100, deadline=None)
    @given(bounds_strategy(max_items=4, allow_zero=True), st.floats(0.0, 1.0), st.integers(0, 2**31))
    def test_ir_and_ranges(self, bounds, g, seed):
        inst = Instance.from_bounds(bounds)
        r = np.random.default_rng(seed)
        v = inst.lower + r.random((50, inst.n_items)) * (inst.upper - inst.lower)
        m = SemiSeparableMechanism(inst, g)
        q, t = m.allocation(v), m.payment(v)
        assert np.all((q >= 0) & (q <= 1 + 1e-12))
        assert np.all(t >= -1e-12)
        assert np.all(t <= np.einsum("ij,ij->i", q, v) + 1e-9)


class TestWorstCase:
    @pytest.mark.parametrize("name", list(NAMED))
    def test_ratio_at_gamma_star(self, name):
        inst = Instance.from_bounds(NAMED[name])
        g = solve_gamma_star(inst).gamma_star
        r, _ = worst_case_ratio(g, inst)
        assert r == pytest.approx(g, abs=1e-10)
        assert grid_min(g, NAMED[name]) >= g - 1e-9

    def test_named_values(self):
        assert worst_case_ratio(solve_gamma_star(Instance.from_bounds(NAMED["wide_narrow"])).gamma_star,
                                NAMED["wide_narrow"])[0] == pytest.approx(CASE1, abs=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(bounds_strategy(max_items=2, allow_zero=True), st.floats(0.02, 1.0))
    def test_argmin_beats_grid(self, bounds, g):
        r, v = worst_case_ratio(g, Instance.from_bounds(bounds))
        assert r <= grid_min(g, bounds, 120) + 1e-12

    def test_small_gamma_limit(self):
        inst = Instance.from_bounds([(1, 4), (2, 4)])
        r, v = worst_case_ratio(1e-9, inst)
        assert r == pytest.approx(3 / 8, abs=1e-6)
        assert v.tolist() == [4, 4]
        # with every lower bound zero the limit is zero
        r0, _ = worst_case_ratio(0.02, Instance.from_bounds([(0, 1), (0, 2)]))
        assert r0 < 1e-15


class TestPriceLaw:
    def test_atom_item(self):
        law = price_law(0.5072, Instance.from_bounds([(0.5, 1)])).items[0]
        assert law.atom == pytest.approx(1 + 0.5072 * math.log(0.5), abs=1e-12)
        assert law.continuous_mass == pytest.approx(0.35156, abs=5e-5)
        assert law.total_mass == pytest.approx(1.0, abs=1e-12)

    def test_threshold_item(self):
        law = price_law(0.5072, Instance.from_bounds([(0.01, 1)])).items[0]
        assert law.atom == 0.0
        assert law.start == pytest.approx(math.exp(-1 / 0.5072))
        assert law.total_mass == pytest.approx(1.0, abs=1e-12)

    def test_point_support(self):
        law = price_law(0.3, Instance.from_bounds([(2, 2)])).items[0]
        assert law.atom == 1.0 and law.continuous_mass == 0.0

    @settings(max_examples=60, deadline=None)
    @given(bounds_strategy(max_items=3, allow_zero=True), st.floats(0.01, 1.0))
    def test_law_reproduces_mechanism(self, bounds, g):
        inst = Instance.from_bounds(bounds)
        law = price_law(g, inst)
        r = np.random.default_rng(1)
        v = inst.lower + r.random((40, inst.n_items)) * (inst.upper - inst.lower)
        m = SemiSeparableMechanism(inst, g)
        for j, item in enumerate(law.items):
            assert item.total_mass == pytest.approx(1.0, abs=1e-9)
            assert item.cdf(v[:, j]) == pytest.approx(m.allocation(v)[:, j], abs=1e-9)
            assert item.expected_payment(v[:, j]) == pytest.approx(m.item_payments(v)[:, j], rel=1e-9, abs=1e-9)

    def test_sampled_revenue(self):
        inst = Instance.from_bounds(NAMED["wide_narrow"])
        g = solve_gamma_star(inst).gamma_star
        prices = price_law(g, inst).sample(200_000, seed=3)
        v = np.array([0.4, 0.8])
        revenue = np.where(prices <= v, prices, 0.0).sum(axis=1).mean()
        assert revenue == pytest.approx(payment(g, inst, v), rel=0.01)


class TestClosedForms:
    def test_examples(self):
        g, case = two_item_closed_form(Instance.from_bounds(NAMED["wide_narrow"]))
        assert case == 1 and g == pytest.approx(CASE1, abs=1e-12)
        g, case = two_item_closed_form(Instance.from_bounds(NAMED["equal_upper"]))
        assert case == 2 and g == pytest.approx(0.42925, abs=5e-6)
        g, case = two_item_closed_form(Instance.from_bounds([(1, math.e), (1, math.e)]))
        assert case == 2 and g == pytest.approx(0.5, abs=1e-12)
        with pytest.raises(ShapeMismatch):
            two_item_closed_form(Instance.from_bounds([(1, 2)]))

    def test_order_independent(self):
        a = two_item_closed_form(Instance.from_bounds([(0.5, 1), (0.01, 1)]))
        assert a[0] == pytest.approx(CASE1, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(bounds_strategy(min_items=2, max_items=2))
    def test_agrees_with_root(self, bounds):
        inst = Instance.from_bounds(bounds)
        assert two_item_closed_form(inst)[0] == pytest.approx(solve_gamma_star(inst).gamma_star, abs=1e-9)

    def test_gap(self):
        inst = Instance.from_bounds([(0, 1), (0.5, 1)])
        gap = gap_vs_separable(inst)
        assert gap == pytest.approx(0.38816, abs=1e-4)
        assert gap == pytest.approx(separable_ratio_zero_lower(inst) / solve_gamma_star(inst).gamma_star, abs=1e-9)
        assert zero_lower_ratio(inst) == pytest.approx(solve_gamma_star(inst).gamma_star, abs=1e-12)
        assert gap_vs_separable(Instance.from_bounds([(0, 1e-12), (0, 1e-12), (0.5, 1)])) == pytest.approx(1, abs=1e-9)
        assert gap_vs_separable(Instance.from_bounds([(0, 100), (0.5, 1)])) < 0.05
        with pytest.raises(ShapeMismatch):
            gap_vs_separable(Instance.from_bounds([(1, 2), (1, 2)]))
