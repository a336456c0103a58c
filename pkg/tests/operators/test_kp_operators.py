"""Tests for the knapsack DP, the packing-while-travelling DP and the (1+1) EA packer."""

import dataclasses

import numpy as np
import pytest

from ttpqd.core.ttp_core import PackingList, Tour, TourEvaluator, is_feasible
from ttpqd.harness.oracle import brute_force_kp, brute_force_pwt, check_kp_optimal, check_pwt_dp, random_tour
from ttpqd.instance.instance_io import Item
from ttpqd.operators.kp_operators import build_pwt_table, ea_packer, kp_optimal, pwt_dp, repair_packing


class TestKpOptimal:
    """Test the exact 0/1 knapsack."""

    def test_everything_fits(self, rectangle):
        g_star, packing = kp_optimal(rectangle)
        assert g_star == 45.0
        assert packing.picked_indices() == [1, 2, 3]

    def test_tight_capacity(self, rectangle):
        tight = dataclasses.replace(rectangle, capacity=10)
        g_star, packing = kp_optimal(tight)
        assert g_star == 20.0
        assert packing.picked_indices() == [2]

    def test_items_heavier_than_capacity(self, rectangle):
        g_star, packing = kp_optimal(dataclasses.replace(rectangle, capacity=4))
        assert g_star == 0.0
        assert packing.picked_indices() == []

    def test_no_items(self, rectangle):
        g_star, packing = kp_optimal(dataclasses.replace(rectangle, items=()))
        assert g_star == 0.0
        assert packing.total_weight == 0

    def test_matches_brute_force(self, octagon):
        g_star, packing = kp_optimal(octagon)
        assert g_star == brute_force_kp(octagon)
        assert packing.total_profit == g_star
        assert is_feasible(octagon, packing)

    def test_random_instances(self, rng):
        report = check_kp_optimal(40, rng, m_max=12)
        assert report.ok, report.failures


class TestPwtDp:
    """Test the optimal packing for a fixed tour."""

    def test_hand_instance_keeps_empty_packing(self, triangle):
        z_star, packing = pwt_dp(triangle, Tour((1, 2, 3)))
        assert z_star == pytest.approx(-30.0)
        assert packing.picked_indices() == []

    def test_hand_instance_picks_item_collected_late(self, triangle):
        """Test that the item pays off when only the closing leg is slowed."""
        z_star, packing = pwt_dp(triangle, Tour((1, 3, 2)))
        assert z_star == pytest.approx(-20.0)
        assert packing.picked_indices() == [1]

    def test_no_items(self, rectangle):
        inst = dataclasses.replace(rectangle, items=())
        z_star, packing = pwt_dp(inst, Tour((1, 2, 3, 4)))
        assert z_star == pytest.approx(-0.5 * 14.0 / 1.0)
        assert packing.total_weight == 0

    def test_packing_attains_optimum(self, octagon, rng):
        for _ in range(5):
            t = random_tour(octagon.n, rng)
            z_star, packing = pwt_dp(octagon, t)
            assert is_feasible(octagon, packing)
            assert TourEvaluator(octagon, t).objective(packing) == pytest.approx(z_star)
            assert z_star == pytest.approx(brute_force_pwt(octagon, t))

    def test_table_starts_at_empty_packing(self, rectangle):
        t = Tour((1, 2, 3, 4))
        table = build_pwt_table(rectangle, t)
        assert table.beta[0] == pytest.approx(table.empty_profit)
        assert table.beta.shape == (rectangle.capacity + 1,)
        assert table.best_weight() <= rectangle.capacity

    def test_random_instances(self, rng):
        report = check_pwt_dp(30, rng, m_max=10)
        assert report.ok, report.failures


class TestRepairPacking:
    """Test the random drop repair."""

    def test_feasible_packing_untouched(self, rectangle, rng):
        y = PackingList.from_indices(rectangle, [1, 2])
        assert repair_packing(rectangle, y, rng) is y

    def test_overweight_packing_repaired(self, rectangle, rng):
        tight = dataclasses.replace(rectangle, capacity=10)
        y = PackingList.from_indices(tight, [1, 2, 3])
        repaired = repair_packing(tight, y, rng)
        assert is_feasible(tight, repaired)
        assert set(repaired.picked_indices()) <= {1, 2, 3}
        assert repaired.picked_indices()

    def test_uniform_drop_between_two_full_weight_items(self, rectangle):
        """Test that each of two capacity-sized items survives about half the time."""
        pair = dataclasses.replace(
            rectangle,
            capacity=10,
            items=(Item(index=1, profit=10.0, weight=10, city=2), Item(index=2, profit=20.0, weight=10, city=3)),
        )
        both = PackingList.from_indices(pair, [1, 2])
        rng = np.random.default_rng(2024)
        trials = 10_000
        survivors = [repair_packing(pair, both, rng).picked_indices() for _ in range(trials)]
        assert all(len(s) == 1 for s in survivors)
        share = sum(s == [1] for s in survivors) / trials
        assert 0.45 <= share <= 0.55

    def test_never_adds_weight_or_items(self, octagon, rng):
        tight = dataclasses.replace(octagon, capacity=15)
        for _ in range(200):
            y = PackingList.from_picks(tight, rng.random(tight.m) < 0.7)
            repaired = repair_packing(tight, y, rng)
            assert repaired.total_weight <= y.total_weight
            assert set(repaired.picked_indices()) <= set(y.picked_indices())
            assert is_feasible(tight, repaired)


class TestEaPacker:
    """Test the (1+1) EA packer."""

    def test_zero_iterations_returns_seed(self, octagon, rng):
        seed = PackingList.empty(octagon)
        assert ea_packer(octagon, random_tour(octagon.n, rng), seed, 0, rng) is seed

    def test_never_worse_than_seed(self, octagon, rng):
        t = random_tour(octagon.n, rng)
        evaluator = TourEvaluator(octagon, t)
        seed = PackingList.from_indices(octagon, [1, 4])
        result = ea_packer(octagon, t, seed, 200, rng)
        assert is_feasible(octagon, result)
        assert evaluator.objective(result) >= evaluator.objective(seed)

    def test_finds_single_item_improvement(self, triangle, rng):
        result = ea_packer(triangle, Tour((1, 3, 2)), PackingList.empty(triangle), 20, rng)
        assert result.picked_indices() == [1]

    def test_deterministic(self, octagon):
        t = Tour(tuple(range(1, 9)))
        seed = PackingList.empty(octagon)
        first = ea_packer(octagon, t, seed, 100, np.random.default_rng(9))
        second = ea_packer(octagon, t, seed, 100, np.random.default_rng(9))
        assert first == second
