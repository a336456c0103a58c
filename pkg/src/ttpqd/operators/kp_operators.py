"""Packing-list optimizers: 0/1 knapsack DP, packing-while-travelling DP and a (1+1) EA."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from loguru import logger

from ttpqd.core.ttp_core import PackingList, Tour, TourEvaluator
from ttpqd.errors import NonIntegerWeight
from ttpqd.instance.instance_io import Instance


def _require_integral_weights(inst: Instance) -> None:
    if inst.m and not all(float(item.weight).is_integer() and item.weight >= 0 for item in inst.items):
        raise NonIntegerWeight("dynamic programs need non-negative integer weights")


def kp_optimal(inst: Instance) -> tuple[float, PackingList]:
    """Exact 0/1 knapsack by dynamic programming over capacities 0..W.

    Returns:
        tuple[float, PackingList]: The optimal profit g* and a packing attaining it.
    """
    _require_integral_weights(inst)
    capacity = inst.capacity
    best = np.zeros(capacity + 1)
    take = np.zeros((inst.m, capacity + 1), dtype=bool)
    for j in range(inst.m):
        w, p = int(inst.weights[j]), float(inst.profits[j])
        if w > capacity:
            continue
        candidate = best[: capacity + 1 - w] + p
        improves = candidate > best[w:]
        take[j, w:] = improves
        best[w:] = np.where(improves, candidate, best[w:])

    picks = np.zeros(inst.m, dtype=bool)
    c = capacity
    for j in range(inst.m - 1, -1, -1):
        if take[j, c]:
            picks[j] = True
            c -= int(inst.weights[j])
    packing = PackingList.from_picks(inst, picks)
    logger.debug(f"Knapsack optimum g*={packing.total_profit} (weight {packing.total_weight})")
    return packing.total_profit, packing


@dataclass
class PwtTable:
    """Packing-while-travelling DP state for one tour.

    `beta` is the last profit row over exact weights 0..W (-inf where unreachable);
    `take[r, j]` records whether row r's item is part of the best combination of weight j.
    Rows follow `item_order`: items sorted by the tour position of their city, then by index.
    """

    item_order: np.ndarray
    beta: np.ndarray
    take: np.ndarray
    empty_profit: float

    def best_weight(self) -> int:
        return int(np.argmax(self.beta))

    def traceback(self, inst: Instance, weight: int) -> np.ndarray:
        picks = np.zeros(inst.m, dtype=bool)
        for row in range(len(self.item_order) - 1, -1, -1):
            if self.take[row, weight]:
                item = int(self.item_order[row])
                picks[item] = True
                weight -= int(inst.weights[item])
        return picks


def build_pwt_table(inst: Instance, t: Tour) -> PwtTable:
    """Fill the PWT table for tour t.

    Adding item i on top of a combination of weight j - w_i changes the speed on every leg
    from its city to the end of the tour, so its contribution is p_i minus the extra rent
    over that suffix of legs.
    """
    _require_integral_weights(inst)
    evaluator = TourEvaluator(inst, t)
    capacity = inst.capacity
    v_max, nu, rent = inst.max_speed, inst.nu, inst.renting_ratio

    # suffix[k]: length of the legs departing tour positions k..n-1
    suffix = np.cumsum(evaluator.legs[::-1])[::-1]
    empty_profit = -rent * float(evaluator.legs.sum()) / v_max
    item_order = np.lexsort((np.arange(inst.m), evaluator.item_positions))

    beta = np.full(capacity + 1, -np.inf)
    beta[0] = empty_profit
    take = np.zeros((inst.m, capacity + 1), dtype=bool)
    inverse_speed = 1.0 / (v_max - nu * np.arange(capacity + 1))
    for row, item in enumerate(item_order):
        w = int(inst.weights[item])
        if w > capacity:
            continue
        p = float(inst.profits[item])
        slowed = float(suffix[evaluator.item_positions[item]])
        j = np.arange(w, capacity + 1)
        candidate = beta[j - w] + p - rent * slowed * (inverse_speed[j] - inverse_speed[j - w])
        improves = candidate > beta[j]
        take[row, w:] = improves
        beta[w:] = np.where(improves, candidate, beta[w:])
    return PwtTable(item_order=item_order, beta=beta, take=take, empty_profit=empty_profit)


def pwt_dp(inst: Instance, t: Tour) -> tuple[float, PackingList]:
    """Optimal packing for a fixed tour.

    Returns:
        tuple[float, PackingList]: z* = max_j beta[j] and a packing attaining it.

    Raises:
        NonIntegerWeight: If an item weight is not integral.
    """
    table = build_pwt_table(inst, t)
    weight = table.best_weight()
    picks = table.traceback(inst, weight)
    return float(table.beta[weight]), PackingList.from_picks(inst, picks)


def repair_packing(inst: Instance, y: PackingList, rng: np.random.Generator) -> PackingList:
    """Drop picked items uniformly at random, one by one, until the capacity holds."""
    if y.total_weight <= inst.capacity:
        return y
    picks = y.picks.copy()
    weight = y.total_weight
    for item in rng.permutation(np.flatnonzero(picks)):
        picks[item] = False
        weight -= int(inst.weights[item])
        if weight <= inst.capacity:
            break
    return PackingList.from_picks(inst, picks)


def ea_packer(
    inst: Instance,
    t: Tour,
    seed_packing: PackingList,
    iters: int,
    rng: np.random.Generator,
) -> PackingList:
    """(1+1) EA on the packing list for a fixed tour.

    Each iteration flips every bit with probability 1/m, repairs, and keeps the offspring
    only if its objective is strictly higher.
    """
    if inst.m == 0 or iters <= 0:
        return seed_packing
    evaluator = TourEvaluator(inst, t)
    current = seed_packing
    current_z = evaluator.objective(current)
    rate = 1.0 / inst.m
    for _ in range(iters):
        flips = rng.random(inst.m) < rate
        if not flips.any():
            continue
        candidate = repair_packing(inst, PackingList.from_picks(inst, current.picks ^ flips), rng)
        candidate_z = evaluator.objective(candidate)
        if candidate_z > current_z:
            current, current_z = candidate, candidate_z
    return current
