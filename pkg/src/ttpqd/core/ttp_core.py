"""Tours, packing lists, solutions and the TTP objective."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from ttpqd.config import config
from ttpqd.errors import InfeasiblePacking, InvalidTour
from ttpqd.instance.instance_io import Instance


@dataclass(frozen=True)
class Tour:
    """A permutation of the cities 1..n, rotated so that city 1 leads.

    Direction is preserved: the objective depends on it.
    """

    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(c) for c in self.order)
        n = len(order)
        if n < 2 or sorted(order) != list(range(1, n + 1)):
            raise InvalidTour(f"not a permutation of 1..{n}: {order[:10]}...")
        start = order.index(1)
        object.__setattr__(self, "order", order[start:] + order[:start])

    @classmethod
    def from_sequence(cls, cities: Iterable[int]) -> Tour:
        return cls(tuple(cities))

    @property
    def n(self) -> int:
        return len(self.order)

    def array(self) -> np.ndarray:
        """0-based city indices in visiting order."""
        return np.asarray(self.order, dtype=np.int64) - 1

    def edges(self) -> set[frozenset[int]]:
        """Undirected edge set."""
        order = self.order
        return {frozenset((order[i], order[(i + 1) % len(order)])) for i in range(len(order))}

    def __len__(self) -> int:
        return len(self.order)


@dataclass(eq=False)
class PackingList:
    """Item selection bit-vector with cached total weight and profit.

    Feasibility is a separate predicate: mutation may create an over-capacity list that
    repair later fixes.
    """

    picks: np.ndarray
    total_weight: int
    total_profit: float

    @classmethod
    def from_picks(cls, inst: Instance, picks: np.ndarray | Sequence[bool]) -> PackingList:
        picks = np.asarray(picks, dtype=bool).copy()
        if picks.shape != (inst.m,):
            raise ValueError(f"packing has {picks.shape} bits, instance has {inst.m} items")
        return cls(
            picks=picks,
            total_weight=int(inst.weights[picks].sum()),
            total_profit=float(inst.profits[picks].sum()),
        )

    @classmethod
    def empty(cls, inst: Instance) -> PackingList:
        return cls.from_picks(inst, np.zeros(inst.m, dtype=bool))

    @classmethod
    def from_indices(cls, inst: Instance, indices: Iterable[int]) -> PackingList:
        """Build from 1-based item indices."""
        picks = np.zeros(inst.m, dtype=bool)
        for j in indices:
            picks[int(j) - 1] = True
        return cls.from_picks(inst, picks)

    def picked_indices(self) -> list[int]:
        """1-based indices of the picked items."""
        return [int(j) + 1 for j in np.flatnonzero(self.picks)]

    def check_coherence(self, inst: Instance) -> None:
        assert self.total_weight == int(inst.weights[self.picks].sum()), "stale weight cache"
        assert np.isclose(self.total_profit, inst.profits[self.picks].sum()), "stale profit cache"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PackingList):
            return NotImplemented
        return bool(np.array_equal(self.picks, other.picks))

    def __hash__(self) -> int:
        return hash(np.packbits(self.picks).tobytes())


class TourEvaluator:
    """Objective evaluation for many packings on one fixed tour.

    Precomputes the leg lengths and the visiting position of every item's city so that a
    packing costs one bincount and one cumulative sum.
    """

    def __init__(self, inst: Instance, tour: Tour):
        self.inst = inst
        self.tour = tour
        self.order = tour.array()
        self.legs = inst.legs(self.order)
        position = np.empty(inst.n, dtype=np.int64)
        position[self.order] = np.arange(inst.n)
        self.position = position
        self.item_positions = position[inst.item_cities] if inst.m else np.zeros(0, dtype=np.int64)

    @property
    def length(self) -> float:
        return float(self.legs.sum())

    def travel_time(self, picks: np.ndarray) -> float:
        inst = self.inst
        if inst.m == 0 or not picks.any():
            return float((self.legs / inst.max_speed).sum())
        # weight picked up at each tour position, then carried on every later leg
        picked_at = np.bincount(
            self.item_positions[picks],
            weights=inst.weights[picks].astype(np.float64),
            minlength=inst.n,
        )
        carried = np.cumsum(picked_at)
        return float((self.legs / (inst.max_speed - inst.nu * carried)).sum())

    def objective(self, packing: PackingList) -> float:
        if packing.total_weight > self.inst.capacity:
            raise InfeasiblePacking(
                f"packing weight {packing.total_weight} exceeds capacity {self.inst.capacity}"
            )
        return packing.total_profit - self.inst.renting_ratio * self.travel_time(packing.picks)


def tour_length(inst: Instance, t: Tour) -> float:
    """Closed tour length f(x)."""
    if t.n != inst.n:
        raise InvalidTour(f"tour covers {t.n} cities, instance has {inst.n}")
    return float(inst.legs(t.array()).sum())


def kp_value(inst: Instance, y: PackingList) -> float:
    """Packing profit g(y)."""
    return float(inst.profits[y.picks].sum())


def is_feasible(inst: Instance, y: PackingList) -> bool:
    return y.total_weight <= inst.capacity


def ttp_objective(inst: Instance, t: Tour, y: PackingList) -> float:
    """TTP objective z(x, y): profit net of the rent paid over the travel time.

    Items of a city slow down the thief from the leg departing that city onward.

    Raises:
        InfeasiblePacking: If the packing exceeds the knapsack capacity.
    """
    if t.n != inst.n:
        raise InvalidTour(f"tour covers {t.n} cities, instance has {inst.n}")
    return TourEvaluator(inst, t).objective(y)


@dataclass(frozen=True, eq=False)
class Solution:
    """A tour with its packing and cached behaviour descriptor (f, g) and fitness z."""

    tour: Tour
    packing: PackingList
    f: float
    g: float
    z: float
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def evaluate(
        cls, inst: Instance, tour: Tour, packing: PackingList, evaluator: TourEvaluator | None = None
    ) -> Solution:
        evaluator = evaluator or TourEvaluator(inst, tour)
        solution = cls(
            tour=tour,
            packing=packing,
            f=evaluator.length,
            g=packing.total_profit,
            z=evaluator.objective(packing),
        )
        if config.DEBUG_CHECKS:
            solution.check_coherence(inst)
        return solution

    @property
    def descriptor(self) -> tuple[float, float]:
        return self.f, self.g

    def check_coherence(self, inst: Instance) -> None:
        self.packing.check_coherence(inst)
        assert is_feasible(inst, self.packing), "infeasible packing stored in a solution"
        assert np.isclose(self.f, tour_length(inst, self.tour)), "stale f"
        assert np.isclose(self.g, kp_value(inst, self.packing)), "stale g"
        assert np.isclose(self.z, ttp_objective(inst, self.tour, self.packing)), "stale z"


def format_solution(solution: Solution) -> str:
    """Two-line exchange format: the tour, then the picked item indices."""
    tour = ",".join(str(c) for c in solution.tour.order)
    picks = ",".join(str(j) for j in solution.packing.picked_indices())
    return f"{tour}\n{picks}\n"


def parse_solution(inst: Instance, text: str) -> Solution:
    lines = text.splitlines() + ["", ""]
    tour = Tour.from_sequence(int(c) for c in lines[0].split(",") if c.strip())
    packing = PackingList.from_indices(inst, (int(j) for j in lines[1].split(",") if j.strip()))
    return Solution.evaluate(inst, tour, packing)
