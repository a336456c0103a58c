"""Brute-force verifiers shared by the test suite and the ``ttpqd oracle`` command."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from loguru import logger

from ttpqd.archive.map_grid import GridSpec, InsertOutcome, MapGrid, cell_index, replay
from ttpqd.core.ttp_core import PackingList, Solution, Tour, TourEvaluator
from ttpqd.instance.instance_io import EdgeWeightType, Instance, Item
from ttpqd.operators.kp_operators import kp_optimal, pwt_dp
from ttpqd.operators.tsp_operators import apply_ab_cycle, build_ab_cycle, two_opt_move

TOLERANCE = 1e-9


@dataclass
class OracleReport:
    name: str
    cases: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, message: str) -> None:
        self.failures.append(message)
        logger.error(f"{self.name}: {message}")


def random_instance(
    rng: np.random.Generator,
    n: int | None = None,
    n_max: int = 8,
    m_max: int = 14,
    weight_max: int = 30,
    capacity_max: int = 100,
    name: str = "random",
) -> Instance:
    """Small random instance with integer coordinates, profits and weights."""
    n = n if n is not None else int(rng.integers(2, n_max + 1))
    m = int(rng.integers(0, m_max + 1))
    coords = tuple((float(x), float(y)) for x, y in rng.integers(0, 100, size=(n, 2)))
    items = tuple(
        Item(
            index=k + 1,
            profit=float(rng.integers(1, 101)),
            weight=int(rng.integers(0, weight_max + 1)),
            city=int(rng.integers(2, n + 1)),
        )
        for k in range(m)
    )
    return Instance(
        name=name,
        n=n,
        coords=coords,
        capacity=int(rng.integers(1, capacity_max + 1)),
        min_speed=0.1,
        max_speed=1.0,
        renting_ratio=float(rng.uniform(0.05, 2.0)),
        items=items,
    )


def random_tour(n: int, rng: np.random.Generator) -> Tour:
    return Tour.from_sequence(int(c) for c in rng.permutation(np.arange(1, n + 1)))


def _all_packings(m: int) -> np.ndarray:
    return np.array(list(itertools.product((False, True), repeat=m)), dtype=bool).reshape(2**m, m)


def brute_force_pwt(inst: Instance, tour: Tour) -> float:
    """Best objective over every feasible packing of a fixed tour."""
    evaluator = TourEvaluator(inst, tour)
    masks = _all_packings(inst.m)
    feasible = masks[masks.astype(np.int64) @ inst.weights <= inst.capacity]
    # weight loaded at each tour position, per packing
    loaded = np.zeros((inst.m, inst.n))
    loaded[np.arange(inst.m), evaluator.item_positions] = inst.weights
    carried = np.cumsum(feasible.astype(np.float64) @ loaded, axis=1)
    time = (evaluator.legs / (inst.max_speed - inst.nu * carried)).sum(axis=1)
    z = feasible.astype(np.float64) @ inst.profits - inst.renting_ratio * time
    return float(z.max())


def brute_force_kp(inst: Instance) -> float:
    masks = _all_packings(inst.m).astype(np.int64)
    feasible = masks @ inst.weights <= inst.capacity
    return float((masks[feasible] @ inst.profits).max())


def check_pwt_dp(cases: int, rng: np.random.Generator, m_max: int = 14) -> OracleReport:
    """pwt_dp against exhaustive enumeration on random small instances."""
    report = OracleReport("pwt_dp")
    for case in range(cases):
        inst = random_instance(rng, m_max=m_max, name=f"pwt_{case}")
        tour = random_tour(inst.n, rng)
        z_star, packing = pwt_dp(inst, tour)
        expected = brute_force_pwt(inst, tour)
        report.cases += 1
        if not math.isclose(z_star, expected, rel_tol=0, abs_tol=TOLERANCE * max(1.0, abs(expected))):
            report.fail(f"case {case}: dp {z_star!r} != brute force {expected!r}")
        elif packing.total_weight > inst.capacity:
            report.fail(f"case {case}: dp packing exceeds the capacity")
        elif not math.isclose(TourEvaluator(inst, tour).objective(packing), z_star, abs_tol=1e-6):
            report.fail(f"case {case}: traceback packing does not attain z*")
    return report


def check_kp_optimal(cases: int, rng: np.random.Generator, m_max: int = 20) -> OracleReport:
    report = OracleReport("kp_optimal")
    for case in range(cases):
        inst = random_instance(rng, n_max=4, m_max=m_max, name=f"kp_{case}")
        g_star, packing = kp_optimal(inst)
        expected = brute_force_kp(inst)
        report.cases += 1
        if g_star != expected:
            report.fail(f"case {case}: dp {g_star!r} != brute force {expected!r}")
        elif packing.total_weight > inst.capacity or packing.total_profit != g_star:
            report.fail(f"case {case}: traceback packing is inconsistent")
    return report


def hand_instance() -> Instance:
    """Equilateral triangle of side 10 with one item (p=100, w=10) in city 2 and W=10."""
    return Instance(
        name="triangle",
        n=3,
        coords=((0.0, 0.0), (10.0, 0.0), (5.0, 5.0 * math.sqrt(3.0))),
        capacity=10,
        min_speed=0.1,
        max_speed=1.0,
        renting_ratio=1.0,
        items=(Item(index=1, profit=100.0, weight=10, city=2),),
        edge_weight_type=EdgeWeightType.EUC_2D,
    )


def check_hand_objective() -> OracleReport:
    """Empty packing gives z = -30; picking the item slows the last two legs to z = -110."""
    report = OracleReport("hand_objective")
    inst = hand_instance()
    evaluator = TourEvaluator(inst, Tour((1, 2, 3)))
    for picks, expected in (([False], -30.0), ([True], -110.0)):
        report.cases += 1
        z = evaluator.objective(PackingList.from_picks(inst, picks))
        if not math.isclose(z, expected, abs_tol=TOLERANCE):
            report.fail(f"picks={picks}: z={z!r}, expected {expected}")
    return report


def check_operator_closure(inst: Instance, cases: int, rng: np.random.Generator) -> OracleReport:
    """EAX and 2-OPT offspring stay permutations led by city 1; AB-cycles stay well formed."""
    report = OracleReport("operator_closure")
    cities = list(range(1, inst.n + 1))
    for case in range(cases):
        parent_a, parent_b = random_tour(inst.n, rng), random_tour(inst.n, rng)
        report.cases += 1
        cycle = build_ab_cycle(parent_a, parent_b, rng)
        if cycle is not None:
            if not cycle.is_valid(parent_a, parent_b):
                report.fail(f"case {case}: malformed AB-cycle {cycle.edges}")
                continue
            children = [apply_ab_cycle(inst, parent_a, cycle), two_opt_move(parent_a, rng)]
        else:
            children = [two_opt_move(parent_a, rng)]
        for child in children:
            if child.order[0] != 1 or sorted(child.order) != cities:
                report.fail(f"case {case}: offspring is not a tour: {child.order}")
    return report


def _synthetic_solution(f: float, g: float, z: float) -> Solution:
    packing = PackingList(picks=np.zeros(0, dtype=bool), total_weight=0, total_profit=g)
    return Solution(tour=Tour((1, 2)), packing=packing, f=f, g=g, z=z)


def check_archive_fuzz(cases: int, rng: np.random.Generator) -> OracleReport:
    """Random insertions keep cell membership, single occupancy and per-cell monotone z."""
    report = OracleReport("archive_fuzz")
    spec = GridSpec(f_star=100.0, g_star=100.0, alpha1=0.05, alpha2=0.20, delta1=20, delta2=20)
    grid = MapGrid(spec)
    offered = []
    fs = rng.uniform(95.0, 110.0, size=cases)
    gs = rng.uniform(75.0, 105.0, size=cases)
    zs = rng.normal(0.0, 10.0, size=cases)
    for k in range(cases):
        s = _synthetic_solution(float(fs[k]), float(gs[k]), float(zs[k]))
        cell = cell_index(spec, s.f, s.g)
        before = grid.cells.get(cell) if cell is not None else None
        outcome = grid.try_insert(s)
        offered.append(s)
        report.cases += 1
        if cell is None:
            if outcome is not InsertOutcome.DISCARDED:
                report.fail(f"insert {k}: out-of-grid solution was {outcome.value}")
            continue
        after = grid.cells[cell]
        if cell_index(spec, after.f, after.g) != cell:
            report.fail(f"insert {k}: occupant of {cell} belongs elsewhere")
        if before is not None and after.z < before.z:
            report.fail(f"insert {k}: z in {cell} decreased from {before.z} to {after.z}")
    rebuilt = replay(spec, offered)
    if rebuilt.occupied() != grid.occupied() or any(rebuilt.cells[c] is not grid.cells[c] for c in grid.cells):
        report.fail("replaying the insertion log does not reproduce the archive")
    return report


def run_all(
    rng: np.random.Generator,
    pwt_cases: int = 200,
    kp_cases: int = 200,
    closure_cases: int = 10_000,
    archive_cases: int = 100_000,
    closure_instance: Instance | None = None,
) -> list[OracleReport]:
    """Run every verifier; operator closure uses a random 51-city instance unless one is given."""
    closure_instance = closure_instance or random_instance(rng, n=51, m_max=0, name="closure")
    return [
        check_pwt_dp(pwt_cases, rng),
        check_kp_optimal(kp_cases, rng),
        check_hand_objective(),
        check_operator_closure(closure_instance, closure_cases, rng),
        check_archive_fuzz(archive_cases, rng),
    ]
