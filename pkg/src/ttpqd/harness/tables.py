"""Cross-run aggregation: per-cell quality and frequency maps, run summaries and the summary table."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ttpqd.archive.map_grid import GridSpec, MapGrid
from ttpqd.config.config import SUMMARY_COLUMNS
from ttpqd.errors import EmptyPopulation


@dataclass
class AggregateMap:
    """Per-cell mean z (NaN where never occupied) and occupancy count over a set of runs.

    Arrays are indexed ``[i - 1, j - 1]``.
    """

    spec: GridSpec
    runs: int
    mean_z: np.ndarray
    occupancy: np.ndarray

    @classmethod
    def empty(cls, spec: GridSpec, runs: int = 1) -> AggregateMap:
        shape = (spec.delta1, spec.delta2)
        return cls(spec=spec, runs=runs, mean_z=np.full(shape, np.nan), occupancy=np.zeros(shape, dtype=int))

    @classmethod
    def from_grids(cls, grids: list[MapGrid]) -> AggregateMap:
        """Aggregate by cell index; the first grid's spec labels the axes."""
        if not grids:
            raise EmptyPopulation("no grids to aggregate")
        spec = grids[0].spec
        shape = (spec.delta1, spec.delta2)
        total = np.zeros(shape)
        occupancy = np.zeros(shape, dtype=int)
        for grid in grids:
            for (i, j), s in grid.cells.items():
                if i <= spec.delta1 and j <= spec.delta2:
                    total[i - 1, j - 1] += s.z
                    occupancy[i - 1, j - 1] += 1
        with np.errstate(invalid="ignore", divide="ignore"):
            mean_z = np.where(occupancy > 0, total / np.maximum(occupancy, 1), np.nan)
        return cls(spec=spec, runs=len(grids), mean_z=mean_z, occupancy=occupancy)

    def frequency(self) -> np.ndarray:
        return self.occupancy / self.runs

    def occupied_cells(self) -> list[tuple[int, int]]:
        return [(int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(self.occupancy))]


@dataclass
class RunSummary:
    avg_z: float
    best_z: float
    mean_elapsed: float
    per_run_z: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "avg_z": self.avg_z,
            "best_z": self.best_z,
            "mean_elapsed": self.mean_elapsed,
            "per_run_z": self.per_run_z,
        }


def summarize_runs(results: list) -> RunSummary:
    """Average and best of the runs' best z, and their mean wall-clock seconds.

    Args:
        results (list[RunResult]): At least one run.

    Raises:
        EmptyPopulation: If no results are given.
    """
    if not results:
        raise EmptyPopulation("no runs to summarize")
    per_run = [float(r.best.z) for r in results]
    return RunSummary(
        avg_z=math.fsum(per_run) / len(per_run),
        best_z=max(per_run),
        mean_elapsed=math.fsum(r.elapsed for r in results) / len(results),
        per_run_z=per_run,
    )


def summary_row(instance: str, tsp_op: str, kp_op: str, summary: RunSummary, timing: bool = True) -> dict:
    return {
        "instance": instance,
        "tsp_op": tsp_op,
        "kp_op": kp_op,
        "runs": len(summary.per_run_z),
        "avg_z": summary.avg_z,
        "best_z": summary.best_z,
        "mean_cpu_s": summary.mean_elapsed if timing else None,
    }


def summary_frame(rows: list[dict]) -> pd.DataFrame:
    """Summary table with the fixed column order."""
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def occupancy_frame(agg: AggregateMap) -> pd.DataFrame:
    """Long (i, j, occupancy, mean_z) table of every cell ever occupied."""
    rows = [
        {"i": i, "j": j, "occupancy": int(agg.occupancy[i - 1, j - 1]), "mean_z": float(agg.mean_z[i - 1, j - 1])}
        for i, j in agg.occupied_cells()
    ]
    return pd.DataFrame(rows, columns=["i", "j", "occupancy", "mean_z"])
