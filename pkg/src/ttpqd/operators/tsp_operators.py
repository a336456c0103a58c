"""Tour variation operators: EAX-1AB crossover, random 2-OPT moves and the EAX initializer."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from loguru import logger

from ttpqd.core.ttp_core import Tour, tour_length
from ttpqd.errors import InvalidConfig, InvalidTour
from ttpqd.instance.instance_io import Instance


@dataclass(frozen=True)
class AbCycle:
    """Closed walk alternating parent-A and parent-B edges.

    Each entry is (u, v, parent) with parent "A" or "B"; consecutive entries share a city
    and the last edge ends where the first one starts.
    """

    edges: tuple[tuple[int, int, str], ...]

    @property
    def a_edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, v, p in self.edges if p == "A"]

    @property
    def b_edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, v, p in self.edges if p == "B"]

    def __len__(self) -> int:
        return len(self.edges)

    def is_valid(self, parent_a: Tour, parent_b: Tour) -> bool:
        """Check alternation, closure, parent membership and edge uniqueness."""
        edges = self.edges
        if len(edges) < 4 or len(edges) % 2:
            return False
        ea, eb = parent_a.edges(), parent_b.edges()
        seen = set()
        for k, (u, v, p) in enumerate(edges):
            nxt = edges[(k + 1) % len(edges)]
            if nxt[0] != v or nxt[2] == p:
                return False
            key = frozenset((u, v))
            if key in seen:
                return False
            seen.add(key)
            if p == "A" and (key not in ea or key in eb):
                return False
            if p == "B" and (key not in eb or key in ea):
                return False
        return True


def _neighbours(t: Tour) -> dict[int, list[int]]:
    order = t.order
    n = len(order)
    return {order[i]: [order[i - 1], order[(i + 1) % n]] for i in range(n)}


def build_ab_cycle(parent_a: Tour, parent_b: Tour, rng: np.random.Generator) -> AbCycle | None:
    """Grow one AB-cycle over the edges the parents do not share.

    The walk starts at a uniformly random city that has a parent-A-only edge, leaves it on a
    random such edge and then alternates B, A, ... choosing uniformly among unused edges. It
    stops as soon as it revisits a city at a position of the same parity, which closes an
    alternating cycle, and returns the enclosed segment.

    Returns:
        AbCycle | None: The cycle, or None when the parents share every edge.
    """
    if parent_a.n != parent_b.n:
        raise InvalidTour("parents cover different city counts")
    adj_a, adj_b = _neighbours(parent_a), _neighbours(parent_b)
    only = {
        "A": {c: [v for v in adj_a[c] if v not in adj_b[c]] for c in adj_a},
        "B": {c: [v for v in adj_b[c] if v not in adj_a[c]] for c in adj_b},
    }
    # a 2-city tour lists the same neighbour twice
    for label in only:
        only[label] = {c: list(dict.fromkeys(vs)) for c, vs in only[label].items()}
    starts = sorted(c for c, vs in only["A"].items() if vs)
    if not starts:
        return None

    city = starts[int(rng.integers(len(starts)))]
    walk = [city]
    labels: list[str] = []
    used: set[tuple[frozenset[int], str]] = set()
    seen = {(city, 0): 0}
    label = "A"
    while True:
        candidates = [v for v in only[label][city] if (frozenset((city, v)), label) not in used]
        nxt = candidates[int(rng.integers(len(candidates)))]
        used.add((frozenset((city, nxt)), label))
        labels.append(label)
        walk.append(nxt)
        city = nxt
        label = "B" if label == "A" else "A"
        k = len(walk) - 1
        start = seen.get((city, k % 2))
        if start is not None:
            edges = tuple((walk[i], walk[i + 1], labels[i]) for i in range(start, k))
            return AbCycle(edges)
        seen[(city, k % 2)] = k


def _sub_tours(adj: dict[int, list[int]]) -> list[list[int]]:
    """Cycles of a degree-2 graph, each as a city list in walking order."""
    visited: set[int] = set()
    cycles = []
    for start in sorted(adj):
        if start in visited:
            continue
        cycle = [start]
        visited.add(start)
        prev, cur = start, adj[start][0]
        while cur != start:
            cycle.append(cur)
            visited.add(cur)
            a, b = adj[cur]
            prev, cur = cur, (b if a == prev else a)
        cycles.append(cycle)
    return cycles


def _replace(adj: dict[int, list[int]], city: int, old: int, new: int) -> None:
    neighbours = adj[city]
    neighbours[neighbours.index(old)] = new


def _merge_sub_tours(inst: Instance, adj: dict[int, list[int]]) -> int:
    """Greedily reconnect sub-tours until one cycle remains; returns the merge count.

    Each merge removes e1 = (a, b) from the smallest sub-tour r and e2 = (c, d) from another
    sub-tour, choosing the pair and reconnection that minimise -d(e1) - d(e2) + d(e3) + d(e4).
    """
    dist = inst.dist
    merges = 0
    while True:
        cycles = _sub_tours(adj)
        if len(cycles) == 1:
            return merges
        r = min(cycles, key=len)
        others = [c for c in cycles if c is not r]
        best = None
        for x in range(len(r)):
            a, b = r[x], r[(x + 1) % len(r)]
            d_ab = dist(a, b)
            for cycle in others:
                for y in range(len(cycle)):
                    c, d = cycle[y], cycle[(y + 1) % len(cycle)]
                    base = -d_ab - dist(c, d)
                    straight = base + dist(a, c) + dist(b, d)
                    if best is None or straight < best[0]:
                        best = (straight, a, b, c, d)
                    crossed = base + dist(a, d) + dist(b, c)
                    if crossed < best[0]:
                        best = (crossed, a, b, d, c)
        # reconnect as (a, c) + (b, d) after the orientation swap above
        _, a, b, c, d = best
        _replace(adj, a, b, c)
        _replace(adj, b, a, d)
        _replace(adj, c, d, a)
        _replace(adj, d, c, b)
        merges += 1


def _walk_tour(adj: dict[int, list[int]], towards: int) -> Tour:
    order = [1]
    prev, cur = 1, towards if towards in adj[1] else min(adj[1])
    while cur != 1:
        order.append(cur)
        a, b = adj[cur]
        prev, cur = cur, (b if a == prev else a)
    return Tour(tuple(order))


def eax_1ab(
    inst: Instance, parent_a: Tour, parent_b: Tour, rng: np.random.Generator
) -> Tour:
    """EAX with a single AB-cycle.

    Copies parent A, swaps the AB-cycle's A-edges for its B-edges and reconnects the
    resulting sub-tours. Identical parents yield a copy of parent A.
    """
    cycle = build_ab_cycle(parent_a, parent_b, rng)
    if cycle is None:
        return parent_a
    return apply_ab_cycle(inst, parent_a, cycle)


def apply_ab_cycle(inst: Instance, parent_a: Tour, cycle: AbCycle) -> Tour:
    adj = {c: list(vs) for c, vs in _neighbours(parent_a).items()}
    for u, v in cycle.a_edges:
        adj[u].remove(v)
        adj[v].remove(u)
    for u, v in cycle.b_edges:
        adj[u].append(v)
        adj[v].append(u)
    merges = _merge_sub_tours(inst, adj)
    if merges:
        logger.trace(f"EAX reconnected {merges + 1} sub-tours")
    return _walk_tour(adj, towards=parent_a.order[1])


def reverse_segment(t: Tour, i: int, j: int) -> Tour:
    """Reverse the cities at 1-based positions i..j (inclusive)."""
    if i > j:
        i, j = j, i
    order = list(t.order)
    order[i - 1 : j] = reversed(order[i - 1 : j])
    return Tour(tuple(order))


def two_opt_move(t: Tour, rng: np.random.Generator) -> Tour:
    """Random 2-OPT: reverse the segment between two uniformly drawn positions in 2..n.

    Position 1 stays pinned to city 1. Equal positions leave the tour unchanged.
    """
    i, j = sorted(int(p) for p in rng.integers(2, t.n + 1, size=2))
    if i == j:
        return t
    return reverse_segment(t, i, j)


def two_opt_descent(inst: Instance, t: Tour) -> Tour:
    """First-improvement 2-OPT until no improving reversal remains."""
    order = list(t.order)
    n = len(order)
    dist = inst.dist
    improved = True
    while improved:
        improved = False
        for i in range(1, n - 1):
            a, b = order[i - 1], order[i]
            d_ab = dist(a, b)
            for j in range(i + 1, n):
                c, d = order[j], order[(j + 1) % n]
                if d == a:
                    continue
                delta = dist(a, c) + dist(b, d) - d_ab - dist(c, d)
                if delta < -1e-9:
                    order[i : j + 1] = reversed(order[i : j + 1])
                    b = order[i]
                    d_ab = dist(a, b)
                    improved = True
    return Tour(tuple(order))


class InitStatus(str, Enum):
    REACHED_TARGET = "reached_target"
    BUDGET_EXHAUSTED_BELOW_TARGET = "budget_exhausted_below_target"
    STALLED = "stalled"


@dataclass
class EvolvedTours:
    """Outcome of the EAX initializer: tours sorted by length plus how the GA ended."""

    tours: list[Tour]
    lengths: list[float]
    status: InitStatus
    generations: int
    best_trace: list[float] = field(default_factory=list)

    @property
    def best_length(self) -> float:
        return self.lengths[0]


def _random_tour(n: int, rng: np.random.Generator) -> Tour:
    return Tour(tuple(int(c) for c in rng.permutation(np.arange(1, n + 1))))


def evolve_initial_tours(
    inst: Instance,
    target_f: float | None,
    budget: int,
    pop_size: int,
    rng: np.random.Generator,
    stall_generations: int | None = None,
) -> EvolvedTours:
    """Generational EAX GA producing a population of short, distinct tours.

    Seeds are random permutations improved by 2-OPT descent. Each generation pairs every
    individual with its successor in a random ring and replaces it with the EAX offspring
    when that offspring is shorter and not already present.

    Args:
        inst: The instance.
        target_f: Stop as soon as the best length reaches this value (None: no target).
        budget: Maximum number of generations.
        pop_size: Population size, at least 2.
        rng: Random generator.
        stall_generations: Stop after this many generations without any replacement.

    Returns:
        EvolvedTours: Final population sorted by length, with the termination status.
    """
    if pop_size < 2:
        raise InvalidConfig(f"pop_size must be at least 2, got {pop_size}")

    population: list[Tour] = []
    # Multiset: tiny instances have fewer distinct tours than pop_size
    members: Counter[tuple[int, ...]] = Counter()
    for _ in range(pop_size):
        tour = two_opt_descent(inst, _random_tour(inst.n, rng))
        for _retry in range(10):
            if tour.order not in members:
                break
            tour = two_opt_descent(inst, _random_tour(inst.n, rng))
        population.append(tour)
        members[tour.order] += 1
    lengths = [tour_length(inst, t) for t in population]
    best_trace = [min(lengths)]
    logger.debug(f"Initializer seeded {pop_size} tours, best length {best_trace[0]}")

    def reached() -> bool:
        return target_f is not None and best_trace[-1] <= target_f

    generation = 0
    stalled = 0
    while not reached() and generation < budget:
        if stall_generations is not None and stalled >= stall_generations:
            break
        generation += 1
        ring = rng.permutation(pop_size)
        replaced = 0
        for k in range(pop_size):
            ia, ib = int(ring[k]), int(ring[(k + 1) % pop_size])
            child = eax_1ab(inst, population[ia], population[ib], rng)
            if child.order in members:
                continue
            child_length = tour_length(inst, child)
            if child_length < lengths[ia]:
                old = population[ia].order
                members[old] -= 1
                if not members[old]:
                    del members[old]
                population[ia] = child
                lengths[ia] = child_length
                members[child.order] += 1
                replaced += 1
        best_trace.append(min(lengths))
        stalled = 0 if replaced else stalled + 1
        logger.trace(f"Initializer generation {generation}: best {best_trace[-1]}")

    if reached():
        status = InitStatus.REACHED_TARGET
    elif generation >= budget:
        status = InitStatus.BUDGET_EXHAUSTED_BELOW_TARGET
        if target_f is not None:
            logger.warning(
                f"Initializer used all {budget} generations; "
                f"best {best_trace[-1]} > target {target_f}"
            )
    else:
        status = InitStatus.STALLED

    ranked = sorted(range(pop_size), key=lambda k: (lengths[k], population[k].order))
    logger.info(
        f"Initializer finished after {generation} generations ({status.value}), "
        f"best length {best_trace[-1]}"
    )
    return EvolvedTours(
        tours=[population[k] for k in ranked],
        lengths=[lengths[k] for k in ranked],
        status=status,
        generations=generation,
        best_trace=best_trace,
    )


def read_tours(path: str | Path) -> list[Tour]:
    """Read newline-separated, comma-joined permutations."""
    tours = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            tours.append(Tour.from_sequence(int(c) for c in line.split(",") if c.strip()))
    return tours


def write_tours(path: str | Path, tours: list[Tour]) -> None:
    lines = [",".join(str(c) for c in t.order) for t in tours]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
