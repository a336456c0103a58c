"""The MAP-Elites grid over the (tour length, packing profit) behaviour space."""

from __future__ import annotations

import json
import math
from collections import Counter
from collections.abc import Iterable
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
from jsonschema import ValidationError, validate
from loguru import logger

from ttpqd.config.config import (
    DEFAULT_ALPHA1,
    DEFAULT_ALPHA2,
    DEFAULT_DELTA1,
    DEFAULT_DELTA2,
    RELAX_EPSILON,
    RELAXED_ALPHA1_ENVELOPE,
    RELAXED_ALPHA2_ENVELOPE,
)
from ttpqd.core.ttp_core import PackingList, Solution, Tour
from ttpqd.errors import EmptyPopulation, InvalidGridSpec, SnapshotError
from ttpqd.instance.instance_io import Instance


@dataclass(frozen=True)
class GridSpec:
    """Thresholds and cell counts of the archive.

    The covered region is f in [f_star, f_max] and g in [g_min, g_star]. For a prefixed grid
    f_max = (1 + alpha1) f_star and g_min = (1 - alpha2) g_star; relaxed grids store the
    population extremes directly so that they are represented exactly.
    """

    f_star: float
    g_star: float
    alpha1: float = DEFAULT_ALPHA1
    alpha2: float = DEFAULT_ALPHA2
    delta1: int = DEFAULT_DELTA1
    delta2: int = DEFAULT_DELTA2
    f_max: float | None = None
    g_min: float | None = None

    def __post_init__(self):
        if not self.f_star > 0 or not self.g_star > 0:
            raise InvalidGridSpec(f"f* and g* must be positive, got {self.f_star}, {self.g_star}")
        if not self.alpha1 > 0 or not self.alpha2 > 0:
            raise InvalidGridSpec(f"alpha1, alpha2 must be positive, got {self.alpha1}, {self.alpha2}")
        if self.delta1 < 1 or self.delta2 < 1:
            raise InvalidGridSpec(f"delta1, delta2 must be >= 1, got {self.delta1}, {self.delta2}")
        if self.f_max is None:
            object.__setattr__(self, "f_max", (1 + self.alpha1) * self.f_star)
        if self.g_min is None:
            object.__setattr__(self, "g_min", (1 - self.alpha2) * self.g_star)

    @property
    def cell_width(self) -> float:
        return (self.f_max - self.f_star) / self.delta1

    @property
    def cell_height(self) -> float:
        return (self.g_star - self.g_min) / self.delta2

    def to_dict(self) -> dict:
        return asdict(self)


def cell_index(spec: GridSpec, f: float, g: float) -> tuple[int, int] | None:
    """1-based cell (i, j) of a descriptor, or None outside the covered region.

    The upper boundaries f = f_max and g = g_star fall into the last cell of their axis.
    """
    if not (spec.f_star <= f <= spec.f_max and spec.g_min <= g <= spec.g_star):
        return None
    i = 1 + math.floor((f - spec.f_star) / (spec.f_max - spec.f_star) * spec.delta1)
    j = 1 + math.floor((g - spec.g_min) / (spec.g_star - spec.g_min) * spec.delta2)
    return min(i, spec.delta1), min(j, spec.delta2)


class InsertOutcome(str, Enum):
    DISCARDED = "discarded"
    FILLED = "filled"
    REPLACED = "replaced"
    REJECTED = "rejected"


@dataclass
class MapGrid:
    """Elitist archive holding at most one solution per cell."""

    spec: GridSpec
    cells: dict[tuple[int, int], Solution] = field(default_factory=dict)
    counts: Counter = field(default_factory=Counter)

    def try_insert(self, s: Solution) -> InsertOutcome:
        """Offer a solution; ties on z keep the incumbent."""
        cell = cell_index(self.spec, s.f, s.g)
        if cell is None:
            outcome = InsertOutcome.DISCARDED
        else:
            incumbent = self.cells.get(cell)
            if incumbent is None:
                self.cells[cell] = s
                outcome = InsertOutcome.FILLED
            elif s.z > incumbent.z:
                self.cells[cell] = s
                outcome = InsertOutcome.REPLACED
            else:
                outcome = InsertOutcome.REJECTED
        self.counts[outcome] += 1
        return outcome

    def occupied(self) -> list[tuple[int, int]]:
        """Occupied cells in row-major order."""
        return sorted(self.cells)

    def elites(self) -> list[Solution]:
        return [self.cells[c] for c in self.occupied()]

    def best(self) -> Solution:
        if not self.cells:
            raise EmptyPopulation("the archive is empty")
        return max(self.elites(), key=lambda s: s.z)

    def coverage(self) -> float:
        return len(self.cells) / (self.spec.delta1 * self.spec.delta2)

    def qd_score(self) -> float:
        return float(sum(s.z for s in self.cells.values()))

    def __len__(self) -> int:
        return len(self.cells)


def try_insert(grid: MapGrid, s: Solution) -> InsertOutcome:
    return grid.try_insert(s)


def replay(spec: GridSpec, solutions: Iterable[Solution]) -> MapGrid:
    """Rebuild a grid from an insertion sequence."""
    grid = MapGrid(spec)
    for s in solutions:
        grid.try_insert(s)
    return grid


def relaxed_thresholds(
    p0: list[Solution],
    f_star: float,
    g_star: float,
    delta1: int = DEFAULT_DELTA1,
    delta2: int = DEFAULT_DELTA2,
    epsilon: float = RELAX_EPSILON,
) -> GridSpec:
    """Grid whose far boundaries are the initial population's extremes.

    f_max is the longest tour in p0 and g_min the smallest profit; f* and g* stay the anchors.
    A zero (or negative) span is widened to an epsilon fraction of the anchor.

    Raises:
        EmptyPopulation: If p0 is empty.
    """
    if not p0:
        raise EmptyPopulation("relaxed thresholds need at least one initial solution")
    f_max = max(s.f for s in p0)
    g_min = min(s.g for s in p0)
    alpha1 = f_max / f_star - 1
    alpha2 = 1 - g_min / g_star
    if alpha1 <= 0:
        logger.debug(f"Degenerate tour-length span (alpha1={alpha1}); widening to {epsilon}")
        alpha1, f_max = epsilon, (1 + epsilon) * f_star
    if alpha2 <= 0:
        logger.debug(f"Degenerate profit span (alpha2={alpha2}); widening to {epsilon}")
        alpha2, g_min = epsilon, (1 - epsilon) * g_star
    lo1, hi1 = RELAXED_ALPHA1_ENVELOPE
    lo2, hi2 = RELAXED_ALPHA2_ENVELOPE
    if not (lo1 <= alpha1 <= hi1 and lo2 <= alpha2 <= hi2):
        logger.warning(
            f"Relaxed thresholds alpha1={alpha1:.4f}, alpha2={alpha2:.4f} fall outside "
            f"the usual envelope [{lo1}, {hi1}] x [{lo2}, {hi2}]"
        )
    return GridSpec(
        f_star=f_star,
        g_star=g_star,
        alpha1=alpha1,
        alpha2=alpha2,
        delta1=delta1,
        delta2=delta2,
        f_max=f_max,
        g_min=g_min,
    )


SNAPSHOT_SCHEMA = {
    "type": "object",
    "properties": {
        "spec": {
            "type": "object",
            "properties": {
                "f_star": {"type": "number"},
                "g_star": {"type": "number"},
                "alpha1": {"type": "number"},
                "alpha2": {"type": "number"},
                "delta1": {"type": "integer", "minimum": 1},
                "delta2": {"type": "integer", "minimum": 1},
                "f_max": {"type": "number"},
                "g_min": {"type": "number"},
            },
            "required": ["f_star", "g_star", "alpha1", "alpha2", "delta1", "delta2"],
        },
        "cells": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "i": {"type": "integer", "minimum": 1},
                    "j": {"type": "integer", "minimum": 1},
                    "f": {"type": "number"},
                    "g": {"type": "number"},
                    "z": {"type": "number"},
                    "tour": {"type": "array", "items": {"type": "integer"}},
                    "picks": {"type": "array", "items": {"type": "integer"}},
                },
                "required": ["i", "j", "f", "g", "z", "tour", "picks"],
            },
        },
    },
    "required": ["spec", "cells"],
}


def to_snapshot(grid: MapGrid) -> dict:
    return {
        "spec": grid.spec.to_dict(),
        "cells": [
            {
                "i": i,
                "j": j,
                "f": s.f,
                "g": s.g,
                "z": s.z,
                "tour": list(s.tour.order),
                "picks": s.packing.picked_indices(),
            }
            for (i, j), s in ((c, grid.cells[c]) for c in grid.occupied())
        ],
    }


def snapshot_frame(grid: MapGrid) -> pd.DataFrame:
    """Flat (i, j, f, g, z) table of the occupied cells."""
    rows = [{"i": i, "j": j, "f": s.f, "g": s.g, "z": s.z} for (i, j), s in grid.cells.items()]
    return pd.DataFrame(rows, columns=["i", "j", "f", "g", "z"]).sort_values(["i", "j"])


def write_snapshot(grid: MapGrid, json_path: Path | None = None, csv_path: Path | None = None) -> None:
    if json_path is not None:
        Path(json_path).write_text(json.dumps(to_snapshot(grid), sort_keys=True), encoding="utf-8")
    if csv_path is not None:
        snapshot_frame(grid).to_csv(csv_path, index=False)


def read_snapshot(path: Path) -> dict:
    """Load and schema-check a snapshot document."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
        validate(instance=document, schema=SNAPSHOT_SCHEMA)
    except (json.JSONDecodeError, ValidationError) as e:
        raise SnapshotError(f"{path}: {e}") from e
    return document


def load_snapshot(path: Path, instance: Instance | None = None) -> MapGrid:
    """Rebuild a grid from a snapshot, re-checking the archive invariants.

    Without an instance the cached (f, g, z) of each cell are trusted; with one they are
    recomputed from the stored tour and picks.

    Raises:
        SnapshotError: On schema violations, misplaced cells or stale descriptors.
    """
    document = read_snapshot(path)
    spec = GridSpec(**document["spec"])
    grid = MapGrid(spec)
    for cell in document["cells"]:
        key = (cell["i"], cell["j"])
        if key in grid.cells:
            raise SnapshotError(f"{path}: cell {key} appears twice")
        tour = Tour.from_sequence(cell["tour"])
        if instance is not None:
            solution = Solution.evaluate(instance, tour, PackingList.from_indices(instance, cell["picks"]))
            if not np.allclose([solution.f, solution.g, solution.z], [cell["f"], cell["g"], cell["z"]]):
                raise SnapshotError(f"{path}: cell {key} descriptor does not match its solution")
        else:
            packing = PackingList(
                picks=np.zeros(0, dtype=bool), total_weight=0, total_profit=float(cell["g"])
            )
            solution = Solution(tour=tour, packing=packing, f=cell["f"], g=cell["g"], z=cell["z"])
        if cell_index(spec, solution.f, solution.g) != key:
            raise SnapshotError(f"{path}: solution stored in {key} belongs elsewhere")
        grid.cells[key] = solution
    return grid
