"""Outer algorithms: population initialization, the bi-level MAP-Elites EA and the (mu+1) EA."""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from loguru import logger

from ttpqd.archive.map_grid import (
    GridSpec,
    InsertOutcome,
    MapGrid,
    cell_index,
    relaxed_thresholds,
)
from ttpqd.config.config import (
    DEFAULT_ALPHA1,
    DEFAULT_ALPHA2,
    DEFAULT_DELTA1,
    DEFAULT_DELTA2,
    DEFAULT_EA_ITERATIONS,
    DEFAULT_INIT_GENERATIONS,
    DEFAULT_INIT_STALL,
    DEFAULT_ITERATIONS,
    DEFAULT_POP_SIZE,
    DEFAULT_SEED,
    DEFAULT_TIME_LIMIT,
    PRESETS,
    RELAX_EPSILON,
)
from ttpqd.core.ttp_core import PackingList, Solution, Tour, TourEvaluator, tour_length
from ttpqd.errors import GridUnreachable, InvalidConfig
from ttpqd.instance.instance_io import Instance
from ttpqd.operators.kp_operators import ea_packer, kp_optimal, pwt_dp, repair_packing
from ttpqd.operators.tsp_operators import (
    EvolvedTours,
    eax_1ab,
    evolve_initial_tours,
    read_tours,
    two_opt_move,
)


class TspOperator(str, Enum):
    EAX = "eax"
    TWO_OPT = "2opt"


class KpOperator(str, Enum):
    DP = "dp"
    ONE_PLUS_ONE_EA = "ea"


class GridMode(str, Enum):
    PREFIXED = "prefixed"
    RELAXED = "relaxed"


class Algorithm(str, Enum):
    BMBEA = "bmbea"
    MU_PLUS_ONE = "mu+1"


@dataclass
class SolverConfig:
    """Settings of a single run.

    Enum fields accept their string values (``"eax"``, ``"2opt"``, ``"dp"``, ``"ea"``, ...).

    Raises:
        InvalidConfig: On out-of-range budgets, grid parameters or unknown operator names.
    """

    algorithm: Algorithm = Algorithm.BMBEA
    tsp_operator: TspOperator = TspOperator.EAX
    kp_operator: KpOperator = KpOperator.DP
    iterations: int = DEFAULT_ITERATIONS
    time_limit: float = DEFAULT_TIME_LIMIT
    grid_mode: GridMode = GridMode.PREFIXED
    alpha1: float = DEFAULT_ALPHA1
    alpha2: float = DEFAULT_ALPHA2
    delta1: int = DEFAULT_DELTA1
    delta2: int = DEFAULT_DELTA2
    relax_epsilon: float = RELAX_EPSILON
    pop_size: int = DEFAULT_POP_SIZE
    ea_iterations: int = DEFAULT_EA_ITERATIONS
    init_generations: int = DEFAULT_INIT_GENERATIONS
    init_stall: int | None = DEFAULT_INIT_STALL
    seed: int = DEFAULT_SEED
    f_star: float | None = None
    tours_file: str | None = None

    def __post_init__(self):
        try:
            self.algorithm = Algorithm(self.algorithm)
            self.tsp_operator = TspOperator(self.tsp_operator)
            self.kp_operator = KpOperator(self.kp_operator)
            self.grid_mode = GridMode(self.grid_mode)
        except ValueError as e:
            raise InvalidConfig(str(e)) from e
        if self.iterations < 0:
            raise InvalidConfig(f"iterations must be >= 0, got {self.iterations}")
        if not self.time_limit > 0:
            raise InvalidConfig(f"time_limit must be positive, got {self.time_limit}")
        if self.pop_size < 2:
            raise InvalidConfig(f"pop_size must be at least 2, got {self.pop_size}")
        if self.ea_iterations < 0 or self.init_generations < 0:
            raise InvalidConfig("ea_iterations and init_generations must be >= 0")
        if not self.alpha1 > 0 or not self.alpha2 > 0:
            raise InvalidConfig(f"alpha1, alpha2 must be positive, got {self.alpha1}, {self.alpha2}")
        if self.delta1 < 1 or self.delta2 < 1:
            raise InvalidConfig(f"delta1, delta2 must be >= 1, got {self.delta1}, {self.delta2}")
        if self.f_star is not None and not self.f_star > 0:
            raise InvalidConfig(f"f_star must be positive, got {self.f_star}")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> SolverConfig:
        """Config with the named alpha preset, then the given overrides."""
        if name not in PRESETS:
            raise InvalidConfig(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return cls(**{**PRESETS[name], **overrides})

    def to_dict(self) -> dict:
        return {k: (v.value if isinstance(v, Enum) else v) for k, v in asdict(self).items()}


@dataclass
class RunSetup:
    """Everything a run derives before its main loop."""

    solutions: list[Solution]
    f_star: float
    g_star: float
    kp_seed: PackingList
    evolved: EvolvedTours | None = None


@dataclass
class RunResult:
    """Outcome of one run.

    ``trace[k]`` is the best z after k iterations (``trace[0]`` after initialization).
    ``events`` lists every archive- or population-changing step as a JSON-ready dict.
    """

    algorithm: Algorithm
    spec: GridSpec
    best: Solution
    trace: list[float]
    elapsed: float
    iterations: int
    outcomes: Counter
    initial: list[Solution]
    grid: MapGrid | None = None
    population: list[Solution] | None = None
    offspring: list[tuple[float, float, float]] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    seed: int | None = None

    def final_solutions(self) -> list[Solution]:
        if self.grid is not None:
            return self.grid.elites()
        return list(self.population or [])

    def final_grid(self) -> MapGrid:
        """The archive, or the final population binned into this run's grid."""
        if self.grid is not None:
            return self.grid
        grid = MapGrid(self.spec)
        for s in self.population or []:
            grid.try_insert(s)
        return grid

    def distinct_cells(self) -> int:
        """Number of grid cells covered by the final archive or population."""
        cells = {cell_index(self.spec, s.f, s.g) for s in self.final_solutions()}
        cells.discard(None)
        return len(cells)


def _pack(
    inst: Instance,
    cfg: SolverConfig,
    tour: Tour,
    seed_packing: PackingList,
    rng: np.random.Generator,
) -> Solution:
    evaluator = TourEvaluator(inst, tour)
    if cfg.kp_operator is KpOperator.DP:
        _, packing = pwt_dp(inst, tour)
    else:
        packing = ea_packer(inst, tour, seed_packing, cfg.ea_iterations, rng)
    return Solution.evaluate(inst, tour, packing, evaluator)


def _initial_tours(
    inst: Instance, cfg: SolverConfig, rng: np.random.Generator
) -> tuple[list[Tour], float, EvolvedTours | None]:
    if cfg.tours_file:
        tours = [t for t in read_tours(cfg.tours_file) if t.n == inst.n]
        if not tours:
            raise InvalidConfig(f"{cfg.tours_file} holds no tour over {inst.n} cities")
        tours = sorted(tours, key=lambda t: (tour_length(inst, t), t.order))[: cfg.pop_size]
        logger.info(f"Loaded {len(tours)} initial tours from {cfg.tours_file}")
        return tours, tour_length(inst, tours[0]), None
    evolved = evolve_initial_tours(
        inst,
        target_f=cfg.f_star,
        budget=cfg.init_generations,
        pop_size=cfg.pop_size,
        rng=rng,
        stall_generations=cfg.init_stall,
    )
    return evolved.tours, evolved.best_length, evolved


def prepare_run(inst: Instance, cfg: SolverConfig, rng: np.random.Generator) -> RunSetup:
    """Initial tours, reference optima and the packed initial population.

    f* is taken from the config when given, else from the best supplied or evolved tour;
    g* always comes from the exact knapsack optimum.
    """
    tours, best_length, evolved = _initial_tours(inst, cfg, rng)
    f_star = cfg.f_star if cfg.f_star is not None else best_length
    g_star, y_star = kp_optimal(inst)
    # y* is feasible by construction; repair keeps the (1+1) EA seed valid regardless
    kp_seed = repair_packing(inst, y_star, rng)
    solutions = [_pack(inst, cfg, t, kp_seed, rng) for t in tours]
    logger.info(
        f"Initial population of {len(solutions)} on {inst.name}: f*={f_star}, g*={g_star}, "
        f"best z={max(s.z for s in solutions)}"
    )
    return RunSetup(solutions=solutions, f_star=f_star, g_star=g_star, kp_seed=kp_seed, evolved=evolved)


def initialize_population(inst: Instance, cfg: SolverConfig, rng: np.random.Generator) -> list[Solution]:
    """Pack each initial tour with the configured KP operator.

    Returns:
        list[Solution]: Feasible solutions, one per initial tour.
    """
    return prepare_run(inst, cfg, rng).solutions


def _grid_spec(cfg: SolverConfig, setup: RunSetup) -> GridSpec:
    if cfg.grid_mode is GridMode.RELAXED:
        return relaxed_thresholds(
            setup.solutions,
            setup.f_star,
            setup.g_star,
            delta1=cfg.delta1,
            delta2=cfg.delta2,
            epsilon=cfg.relax_epsilon,
        )
    return GridSpec(
        f_star=setup.f_star,
        g_star=setup.g_star,
        alpha1=cfg.alpha1,
        alpha2=cfg.alpha2,
        delta1=cfg.delta1,
        delta2=cfg.delta2,
    )


def _offspring(
    inst: Instance,
    cfg: SolverConfig,
    parents: list[Solution],
    rng: np.random.Generator,
) -> Solution:
    """Vary the first parent's tour and pack the child, seeding the EA with that parent's packing."""
    if cfg.tsp_operator is TspOperator.EAX:
        tour = eax_1ab(inst, parents[0].tour, parents[1].tour, rng)
    else:
        tour = two_opt_move(parents[0].tour, rng)
    return _pack(inst, cfg, tour, parents[0].packing, rng)


def _event(iteration: int, outcome: InsertOutcome, spec: GridSpec, s: Solution) -> dict:
    cell = cell_index(spec, s.f, s.g)
    i, j = cell if cell is not None else (None, None)
    return {"iter": iteration, "outcome": outcome.value, "i": i, "j": j, "f": s.f, "g": s.g, "z": s.z}


def _out_of_time(start: float, cfg: SolverConfig) -> bool:
    return time.perf_counter() - start > cfg.time_limit


def bmbea_run(inst: Instance, cfg: SolverConfig, rng: np.random.Generator) -> RunResult:
    """Bi-level MAP-Elites EA.

    Each iteration draws parents uniformly from the occupied cells, varies the tour at the
    upper level, packs the child at the lower level and offers it to the archive.

    Raises:
        GridUnreachable: If no initial solution falls inside the grid.
    """
    start = time.perf_counter()
    setup = prepare_run(inst, cfg, rng)
    spec = _grid_spec(cfg, setup)
    grid = MapGrid(spec)
    events = []
    for s in setup.solutions:
        outcome = grid.try_insert(s)
        if outcome in (InsertOutcome.FILLED, InsertOutcome.REPLACED):
            events.append(_event(0, outcome, spec, s))
    if not grid.cells:
        raise GridUnreachable(
            f"no initial solution of {inst.name} falls inside f in [{spec.f_star}, {spec.f_max}], "
            f"g in [{spec.g_min}, {spec.g_star}]"
        )
    logger.info(
        f"BMBEA on {inst.name}: {len(grid)} of {spec.delta1 * spec.delta2} cells filled, "
        f"alpha1={spec.alpha1:.4f}, alpha2={spec.alpha2:.4f}"
    )

    trace = [grid.best().z]
    offspring = []
    iteration = 0
    while iteration < cfg.iterations and not _out_of_time(start, cfg):
        iteration += 1
        occupied = grid.occupied()
        if cfg.tsp_operator is TspOperator.EAX:
            if len(occupied) == 1:
                logger.debug(f"Iteration {iteration}: single occupied cell, EAX parents coincide")
                picks = [0, 0]
            else:
                picks = rng.choice(len(occupied), size=2, replace=False)
        else:
            picks = [rng.integers(len(occupied))]
        parents = [grid.cells[occupied[int(k)]] for k in picks]

        child = _offspring(inst, cfg, parents, rng)
        offspring.append((child.f, child.g, child.z))
        outcome = grid.try_insert(child)
        if outcome in (InsertOutcome.FILLED, InsertOutcome.REPLACED):
            events.append(_event(iteration, outcome, spec, child))
        changed = outcome in (InsertOutcome.FILLED, InsertOutcome.REPLACED)
        trace.append(max(trace[-1], child.z) if changed else trace[-1])

    elapsed = time.perf_counter() - start
    best = grid.best()
    logger.info(
        f"BMBEA finished {iteration} iterations in {elapsed:.1f}s: best z={best.z}, "
        f"coverage={grid.coverage():.3f}"
    )
    return RunResult(
        algorithm=Algorithm.BMBEA,
        spec=spec,
        best=best,
        trace=trace,
        elapsed=elapsed,
        iterations=iteration,
        outcomes=Counter(grid.counts),
        initial=setup.solutions,
        grid=grid,
        offspring=offspring,
        events=events,
        seed=cfg.seed,
    )


def evict_worst(population: list[tuple[int, Solution]]) -> tuple[int, Solution]:
    """Remove and return the (birth, solution) pair with the lowest z, oldest first on ties."""
    worst = min(range(len(population)), key=lambda k: (population[k][1].z, population[k][0]))
    return population.pop(worst)


def mu_plus_one_run(inst: Instance, cfg: SolverConfig, rng: np.random.Generator) -> RunResult:
    """(mu+1) EA sharing initialization and variation with BMBEA.

    The offspring joins the population and the individual with the lowest z leaves; among
    equally bad individuals the oldest goes.
    """
    start = time.perf_counter()
    setup = prepare_run(inst, cfg, rng)
    spec = _grid_spec(cfg, setup)
    # (birth, solution); the initial population is born in list order
    population = list(enumerate(setup.solutions))
    next_birth = len(population)
    outcomes: Counter = Counter()
    events = []
    trace = [max(s.z for _, s in population)]
    offspring = []
    logger.info(f"(mu+1) EA on {inst.name} with mu={len(population)}")

    iteration = 0
    while iteration < cfg.iterations and not _out_of_time(start, cfg):
        iteration += 1
        if cfg.tsp_operator is TspOperator.EAX:
            picks = rng.choice(len(population), size=2, replace=False)
        else:
            picks = [rng.integers(len(population))]
        parents = [population[int(k)][1] for k in picks]

        child = _offspring(inst, cfg, parents, rng)
        offspring.append((child.f, child.g, child.z))
        population.append((next_birth, child))
        next_birth += 1
        evicted_birth, _ = evict_worst(population)
        if evicted_birth == next_birth - 1:
            outcome = InsertOutcome.REJECTED
        else:
            outcome = InsertOutcome.REPLACED
            events.append(_event(iteration, outcome, spec, child))
        outcomes[outcome] += 1
        trace.append(max(s.z for _, s in population))

    elapsed = time.perf_counter() - start
    final = [s for _, s in population]
    best = max(final, key=lambda s: s.z)
    logger.info(f"(mu+1) EA finished {iteration} iterations in {elapsed:.1f}s: best z={best.z}")
    return RunResult(
        algorithm=Algorithm.MU_PLUS_ONE,
        spec=spec,
        best=best,
        trace=trace,
        elapsed=elapsed,
        iterations=iteration,
        outcomes=outcomes,
        initial=setup.solutions,
        population=final,
        offspring=offspring,
        events=events,
        seed=cfg.seed,
    )


def run_solver(inst: Instance, cfg: SolverConfig, rng: np.random.Generator | None = None) -> RunResult:
    """Dispatch on ``cfg.algorithm``; a fresh generator is seeded from ``cfg.seed`` when none is given."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    if cfg.algorithm is Algorithm.MU_PLUS_ONE:
        return mu_plus_one_run(inst, cfg, rng)
    return bmbea_run(inst, cfg, rng)
