"""Tests for the MAP-Elites grid, relaxed thresholds and snapshots."""

import json

import numpy as np
import pandas as pd
import pytest

from ttpqd.archive.map_grid import (
    GridSpec,
    InsertOutcome,
    MapGrid,
    cell_index,
    load_snapshot,
    read_snapshot,
    relaxed_thresholds,
    replay,
    snapshot_frame,
    write_snapshot,
)
from ttpqd.core.ttp_core import PackingList, Solution, Tour
from ttpqd.errors import EmptyPopulation, InvalidGridSpec, SnapshotError
from ttpqd.harness.oracle import check_archive_fuzz


def _point(f: float, g: float, z: float) -> Solution:
    packing = PackingList(picks=np.zeros(0, dtype=bool), total_weight=0, total_profit=g)
    return Solution(tour=Tour((1, 2, 3)), packing=packing, f=f, g=g, z=z)


@pytest.fixture
def spec():
    return GridSpec(f_star=100.0, g_star=100.0, alpha1=0.05, alpha2=0.20, delta1=20, delta2=20)


@pytest.fixture
def rectangle_grid(rectangle):
    """Two real solutions of the rectangle in distinct cells."""
    grid = MapGrid(GridSpec(f_star=14.0, g_star=45.0, alpha1=0.5, alpha2=0.6, delta1=20, delta2=20))
    grid.try_insert(Solution.evaluate(rectangle, Tour((1, 2, 3, 4)), PackingList.from_indices(rectangle, [1, 2, 3])))
    grid.try_insert(Solution.evaluate(rectangle, Tour((1, 3, 2, 4)), PackingList.from_indices(rectangle, [2])))
    return grid


class TestGridSpec:
    """Test threshold derivation and validation."""

    def test_derived_bounds(self, spec):
        assert spec.f_max == pytest.approx(105.0)
        assert spec.g_min == pytest.approx(80.0)
        assert spec.cell_width == pytest.approx(0.25)
        assert spec.cell_height == pytest.approx(1.0)

    def test_explicit_bounds_kept(self):
        spec = GridSpec(f_star=10.0, g_star=10.0, alpha1=0.3, alpha2=0.3, f_max=13.0, g_min=7.0)
        assert spec.f_max == 13.0
        assert spec.g_min == 7.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"f_star": 0.0, "g_star": 1.0},
            {"f_star": 1.0, "g_star": -1.0},
            {"f_star": 1.0, "g_star": 1.0, "alpha1": 0.0},
            {"f_star": 1.0, "g_star": 1.0, "alpha2": -0.1},
            {"f_star": 1.0, "g_star": 1.0, "delta1": 0},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvalidGridSpec):
            GridSpec(**kwargs)

    def test_to_dict(self, spec):
        assert GridSpec(**spec.to_dict()) == spec


class TestCellIndex:
    """Test descriptor binning."""

    def test_optimum_corner(self, spec):
        """Test that (f*, g*) lands in the top-left cell."""
        assert cell_index(spec, 100.0, 100.0) == (1, 20)

    def test_far_corner_clamped(self, spec):
        assert cell_index(spec, spec.f_max, spec.g_min) == (20, 1)

    def test_interior(self, spec):
        assert cell_index(spec, 101.3, 90.7) == (6, 11)

    @pytest.mark.parametrize("f, g", [(99.9, 90.0), (106.0, 90.0), (101.0, 100.1), (101.0, 79.0)])
    def test_outside(self, spec, f, g):
        assert cell_index(spec, f, g) is None


class TestMapGrid:
    """Test insertion outcomes and archive summaries."""

    def test_outcomes(self, spec):
        grid = MapGrid(spec)
        assert grid.try_insert(_point(101.3, 90.7, 1.0)) is InsertOutcome.FILLED
        assert grid.try_insert(_point(101.3, 90.2, 1.0)) is InsertOutcome.REJECTED
        assert grid.try_insert(_point(101.3, 90.2, 0.5)) is InsertOutcome.REJECTED
        assert grid.try_insert(_point(101.3, 90.2, 2.0)) is InsertOutcome.REPLACED
        assert grid.try_insert(_point(120.0, 90.0, 99.0)) is InsertOutcome.DISCARDED
        assert len(grid) == 1
        assert grid.cells[(6, 11)].z == 2.0
        assert grid.counts[InsertOutcome.REJECTED] == 2

    def test_tie_keeps_incumbent(self, spec):
        grid = MapGrid(spec)
        first = _point(101.3, 90.7, 1.0)
        grid.try_insert(first)
        grid.try_insert(_point(101.3, 90.7, 1.0))
        assert grid.cells[(6, 11)] is first

    def test_summaries(self, spec):
        grid = replay(spec, [_point(100.0, 100.0, 3.0), _point(104.1, 81.5, -1.0)])
        assert grid.occupied() == [(1, 20), (17, 2)]
        assert grid.best().z == 3.0
        assert grid.coverage() == pytest.approx(2 / 400)
        assert grid.qd_score() == pytest.approx(2.0)

    def test_best_of_empty_grid(self, spec):
        with pytest.raises(EmptyPopulation):
            MapGrid(spec).best()

    def test_fuzz(self, rng):
        report = check_archive_fuzz(3000, rng)
        assert report.ok, report.failures


class TestRelaxedThresholds:
    """Test grids sized from the initial population."""

    def test_extremes_define_bounds(self):
        p0 = [_point(100.0, 100.0, 0.0), _point(110.0, 60.0, 0.0), _point(104.0, 75.0, 0.0)]
        spec = relaxed_thresholds(p0, 100.0, 100.0)
        assert spec.f_max == 110.0
        assert spec.g_min == 60.0
        assert spec.alpha1 == pytest.approx(0.1)
        assert spec.alpha2 == pytest.approx(0.4)

    def test_every_initial_solution_fits(self):
        p0 = [_point(100.0, 100.0, 0.0), _point(110.0, 60.0, 0.0), _point(104.0, 75.0, 0.0)]
        spec = relaxed_thresholds(p0, 100.0, 100.0)
        assert cell_index(spec, 110.0, 60.0) == (20, 1)
        assert all(cell_index(spec, s.f, s.g) is not None for s in p0)

    def test_degenerate_span_widened(self):
        spec = relaxed_thresholds([_point(100.0, 100.0, 0.0)], 100.0, 100.0, epsilon=1e-3)
        assert spec.alpha1 == pytest.approx(1e-3)
        assert spec.alpha2 == pytest.approx(1e-3)
        assert cell_index(spec, 100.0, 100.0) == (1, 20)

    def test_empty_population(self):
        with pytest.raises(EmptyPopulation):
            relaxed_thresholds([], 100.0, 100.0)


class TestSnapshots:
    """Test writing and reloading archives."""

    def test_write_then_load(self, tmp_path, rectangle, rectangle_grid):
        json_path, csv_path = tmp_path / "map.json", tmp_path / "map.csv"
        write_snapshot(rectangle_grid, json_path, csv_path)
        loaded = load_snapshot(json_path, rectangle)
        assert loaded.occupied() == rectangle_grid.occupied()
        assert loaded.spec == rectangle_grid.spec
        for cell in loaded.occupied():
            assert loaded.cells[cell].z == pytest.approx(rectangle_grid.cells[cell].z)
            assert loaded.cells[cell].tour == rectangle_grid.cells[cell].tour
        frame = pd.read_csv(csv_path)
        assert list(frame.columns) == ["i", "j", "f", "g", "z"]
        assert len(frame) == 2

    def test_load_without_instance_trusts_cache(self, tmp_path, rectangle_grid):
        path = tmp_path / "map.json"
        write_snapshot(rectangle_grid, path)
        loaded = load_snapshot(path)
        assert [s.z for s in loaded.elites()] == [s.z for s in rectangle_grid.elites()]

    def test_json_is_stable(self, tmp_path, rectangle_grid):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_snapshot(rectangle_grid, a)
        write_snapshot(rectangle_grid, b)
        assert a.read_bytes() == b.read_bytes()

    def test_stale_fitness_detected(self, tmp_path, rectangle, rectangle_grid):
        path = tmp_path / "map.json"
        write_snapshot(rectangle_grid, path)
        document = json.loads(path.read_text())
        document["cells"][0]["z"] += 1.0
        path.write_text(json.dumps(document))
        with pytest.raises(SnapshotError, match="does not match"):
            load_snapshot(path, rectangle)

    def test_misplaced_cell_detected(self, tmp_path, rectangle_grid):
        path = tmp_path / "map.json"
        write_snapshot(rectangle_grid, path)
        document = json.loads(path.read_text())
        document["cells"][0]["i"] += 1
        path.write_text(json.dumps(document))
        with pytest.raises(SnapshotError, match="belongs elsewhere"):
            load_snapshot(path)

    def test_duplicate_cell_detected(self, tmp_path, rectangle_grid):
        path = tmp_path / "map.json"
        write_snapshot(rectangle_grid, path)
        document = json.loads(path.read_text())
        document["cells"].append(document["cells"][0])
        path.write_text(json.dumps(document))
        with pytest.raises(SnapshotError, match="twice"):
            load_snapshot(path)

    def test_schema_violation(self, tmp_path):
        path = tmp_path / "map.json"
        path.write_text(json.dumps({"spec": {"f_star": 1.0}}))
        with pytest.raises(SnapshotError):
            read_snapshot(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "map.json"
        path.write_text("not json")
        with pytest.raises(SnapshotError):
            read_snapshot(path)

    def test_frame_sorted(self, rectangle_grid):
        frame = snapshot_frame(rectangle_grid)
        assert list(zip(frame["i"], frame["j"])) == rectangle_grid.occupied()
