"""Multi-run experiments: settings resolution, (parallel) execution, aggregation and artifact export."""

from __future__ import annotations

import json
import multiprocessing
import os
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from loguru import logger

from ttpqd.archive.map_grid import write_snapshot
from ttpqd.config.config import (
    DEFAULT_OUT_DIR,
    PRESETS,
    RELAXED_ALPHA1_ENVELOPE,
    RELAXED_ALPHA2_ENVELOPE,
)
from ttpqd.errors import ExperimentFailed, InvalidConfig
from ttpqd.harness.render import HeatmapMode, render_heatmap, render_population_map
from ttpqd.harness.tables import (
    AggregateMap,
    RunSummary,
    occupancy_frame,
    summarize_runs,
    summary_frame,
    summary_row,
)
from ttpqd.instance.instance_io import Instance, load_instance
from ttpqd.solvers.solvers import Algorithm, GridMode, RunResult, SolverConfig, run_solver

# CLI flag name -> SolverConfig field
SOLVER_SETTINGS = {
    "algorithm": "algorithm",
    "tsp_op": "tsp_operator",
    "kp_op": "kp_operator",
    "iters": "iterations",
    "time_limit": "time_limit",
    "grid_mode": "grid_mode",
    "alpha1": "alpha1",
    "alpha2": "alpha2",
    "delta1": "delta1",
    "delta2": "delta2",
    "pop_size": "pop_size",
    "ea_iters": "ea_iterations",
    "seed": "seed",
    "fstar": "f_star",
    "tours_file": "tours_file",
}

# Environment variables that override a YAML value (but not a CLI flag)
SETTING_ENV = {
    "seed": ("TTPQD_SEED", int),
    "iters": ("TTPQD_ITERATIONS", int),
    "time_limit": ("TTPQD_TIME_LIMIT", float),
    "alpha1": ("TTPQD_ALPHA1", float),
    "alpha2": ("TTPQD_ALPHA2", float),
    "delta1": ("TTPQD_DELTA1", int),
    "delta2": ("TTPQD_DELTA2", int),
    "pop_size": ("TTPQD_POP_SIZE", int),
    "ea_iters": ("TTPQD_EA_ITERATIONS", int),
}

VERSIONED_PACKAGES = ["ttpqd", "numpy", "pandas", "matplotlib"]


def resolve_settings(cli_values: dict, config_path: str | Path | None = None) -> dict:
    """Merge settings with precedence CLI flag > environment variable > YAML file.

    Built-in defaults apply afterwards, for keys none of the three sources set.

    Raises:
        InvalidConfig: If the YAML file is not a mapping.
    """
    settings: dict = {}
    if config_path is not None:
        with open(config_path, encoding="utf-8") as fh:
            document = yaml.safe_load(fh) or {}
        if not isinstance(document, dict):
            raise InvalidConfig(f"{config_path} must hold a mapping of settings")
        settings.update({str(k).replace("-", "_"): v for k, v in document.items()})
        logger.debug(f"Loaded {len(document)} settings from {config_path}")
    for key, (env_name, cast) in SETTING_ENV.items():
        raw = os.getenv(env_name)
        if raw is not None:
            settings[key] = cast(raw)
    settings.update({k: v for k, v in cli_values.items() if v is not None and v != ()})
    return settings


def solver_config_from_settings(settings: dict) -> SolverConfig:
    """Build a SolverConfig; a preset supplies alpha1/alpha2 unless they are set explicitly."""
    kwargs = {}
    preset = settings.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise InvalidConfig(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        kwargs.update(PRESETS[preset])
    for key, name in SOLVER_SETTINGS.items():
        if settings.get(key) is not None:
            kwargs[name] = settings[key]
    if "tours_file" in kwargs:
        kwargs["tours_file"] = str(kwargs["tours_file"])
    return SolverConfig(**kwargs)


@dataclass
class ExperimentSpec:
    """Instances, solver settings, run count and export toggles of one experiment."""

    instances: list[Path]
    solver: SolverConfig = field(default_factory=SolverConfig)
    runs: int = 1
    out_dir: Path = Path(DEFAULT_OUT_DIR)
    jobs: int = 1
    export_maps: bool = True
    export_heatmaps: bool = True
    export_summary: bool = True
    timing: bool = True

    def __post_init__(self):
        if isinstance(self.instances, (str, Path)):
            self.instances = [self.instances]
        self.instances = [Path(p) for p in self.instances]
        self.out_dir = Path(self.out_dir)
        if not self.instances:
            raise InvalidConfig("an experiment needs at least one instance")
        if self.runs < 1:
            raise InvalidConfig(f"runs must be >= 1, got {self.runs}")
        if self.jobs < 1:
            raise InvalidConfig(f"jobs must be >= 1, got {self.jobs}")

    @classmethod
    def from_settings(cls, settings: dict) -> ExperimentSpec:
        if not settings.get("instance"):
            raise InvalidConfig("no instance given (use --instance or the 'instance' YAML key)")
        return cls(
            instances=settings["instance"],
            solver=solver_config_from_settings(settings),
            runs=int(settings.get("runs", 1)),
            out_dir=Path(settings.get("out_dir", DEFAULT_OUT_DIR)),
            jobs=int(settings.get("jobs", 1)),
            export_maps=bool(settings.get("export_maps", True)),
            export_heatmaps=bool(settings.get("export_heatmaps", True)),
            export_summary=bool(settings.get("export_summary", True)),
            timing=not settings.get("no_timing", False),
        )

    def seeds(self) -> list[int]:
        return [self.solver.seed + k for k in range(self.runs)]

    def to_dict(self) -> dict:
        return {
            "instances": [str(p) for p in self.instances],
            "solver": self.solver.to_dict(),
            "runs": self.runs,
            "out_dir": str(self.out_dir),
            "jobs": self.jobs,
            "export_maps": self.export_maps,
            "export_heatmaps": self.export_heatmaps,
            "export_summary": self.export_summary,
            "timing": self.timing,
        }


@dataclass
class ExperimentResult:
    results: dict[str, list[RunResult]]
    aggregates: dict[str, AggregateMap]
    summaries: dict[str, RunSummary]
    summary: pd.DataFrame
    manifest_path: Path


def _package_versions() -> dict[str, str]:
    versions = {}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _run_once(args: tuple[Instance, SolverConfig, int]) -> RunResult:
    inst, cfg, seed = args
    cfg = SolverConfig(**{**cfg.to_dict(), "seed": seed})
    return run_solver(inst, cfg, np.random.default_rng(seed))


def _write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")


def write_run_log(path: Path, result: RunResult) -> None:
    """One sorted-key JSON object per archive-changing event."""
    with open(path, "w", encoding="utf-8") as fh:
        for event in result.events:
            fh.write(json.dumps(event, sort_keys=True) + "\n")


def _in_envelope(alpha1: float, alpha2: float) -> bool:
    lo1, hi1 = RELAXED_ALPHA1_ENVELOPE
    lo2, hi2 = RELAXED_ALPHA2_ENVELOPE
    return lo1 <= alpha1 <= hi1 and lo2 <= alpha2 <= hi2


def _run_record(result: RunResult, timing: bool) -> dict:
    spec = result.spec
    record = {
        "seed": result.seed,
        "best_z": result.best.z,
        "iterations": result.iterations,
        "f_star": spec.f_star,
        "g_star": spec.g_star,
        "f_max": spec.f_max,
        "g_min": spec.g_min,
        "alpha1": spec.alpha1,
        "alpha2": spec.alpha2,
        "distinct_cells": result.distinct_cells(),
        "outcomes": {outcome.value: count for outcome, count in sorted(result.outcomes.items())},
    }
    if timing:
        record["elapsed_s"] = result.elapsed
    return record


def _export_instance(spec: ExperimentSpec, name: str, results: list[RunResult]) -> AggregateMap:
    target = spec.out_dir / name
    target.mkdir(parents=True, exist_ok=True)
    for k, result in enumerate(results):
        write_run_log(target / f"run_{k}.jsonl", result)
        if spec.export_maps:
            write_snapshot(result.final_grid(), target / f"map_{k}.json", target / f"map_{k}.csv")
        if spec.export_heatmaps and result.algorithm is Algorithm.MU_PLUS_ONE:
            render_population_map(result, target / f"population_{k}.svg")
    aggregate = AggregateMap.from_grids([r.final_grid() for r in results])
    if spec.export_maps:
        occupancy_frame(aggregate).to_csv(target / "occupancy.csv", index=False)
    if spec.export_heatmaps:
        render_heatmap(aggregate, HeatmapMode.QUALITY, target / "quality.svg")
        render_heatmap(aggregate, HeatmapMode.FREQUENCY, target / "frequency.svg")
    return aggregate


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run every instance ``spec.runs`` times with seeds seed, seed+1, ... and export the artifacts.

    Runs of one instance execute in a process pool when ``spec.jobs > 1``; aggregation waits
    for all of them.

    Raises:
        ExperimentFailed: When a run fails; a partial manifest is written first.
    """
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = spec.out_dir / "manifest.json"
    manifest = {
        "spec": spec.to_dict(),
        "seeds": spec.seeds(),
        "versions": _package_versions(),
        "timing": "wall-clock seconds per run (time.perf_counter), not CPU time",
        "instances": {},
        "status": "running",
    }
    results: dict[str, list[RunResult]] = {}
    aggregates: dict[str, AggregateMap] = {}
    summaries: dict[str, RunSummary] = {}
    rows = []

    for path in spec.instances:
        inst = load_instance(path)
        runs: list[RunResult] = []
        jobs = [(inst, spec.solver, seed) for seed in spec.seeds()]
        logger.info(f"Running {spec.runs} run(s) on {inst.name} with {min(spec.jobs, spec.runs)} worker(s)")
        try:
            if spec.jobs > 1 and spec.runs > 1:
                with multiprocessing.Pool(min(spec.jobs, spec.runs)) as pool:
                    for result in pool.imap(_run_once, jobs):
                        runs.append(result)
            else:
                for job in jobs:
                    runs.append(_run_once(job))
        except Exception as e:
            manifest["status"] = "failed"
            manifest["error"] = f"{inst.name}: {type(e).__name__}: {e}"
            manifest["instances"][inst.name] = {
                "completed_runs": [_run_record(r, spec.timing) for r in runs],
            }
            _write_manifest(manifest_path, manifest)
            logger.error(f"Run {len(runs)} on {inst.name} failed: {e}")
            raise ExperimentFailed(
                f"experiment aborted on {inst.name}: {e}", manifest_path=manifest_path
            ) from e

        aggregates[inst.name] = _export_instance(spec, inst.name, runs)
        summaries[inst.name] = summarize_runs(runs)
        results[inst.name] = runs
        rows.append(
            summary_row(
                inst.name,
                spec.solver.tsp_operator.value,
                spec.solver.kp_operator.value,
                summaries[inst.name],
                timing=spec.timing,
            )
        )
        records = [_run_record(r, spec.timing) for r in runs]
        entry = {"runs": records, "summary": summaries[inst.name].to_dict()}
        if not spec.timing:
            entry["summary"].pop("mean_elapsed")
        if spec.solver.grid_mode is GridMode.RELAXED:
            entry["alpha_outside_envelope"] = [
                k for k, r in enumerate(records) if not _in_envelope(r["alpha1"], r["alpha2"])
            ]
            if entry["alpha_outside_envelope"]:
                logger.warning(
                    f"{inst.name}: runs {entry['alpha_outside_envelope']} derived thresholds "
                    f"outside the usual envelope"
                )
        manifest["instances"][inst.name] = entry

    frame = summary_frame(rows)
    if spec.export_summary:
        frame.to_csv(spec.out_dir / "summary.csv", index=False)
    manifest["status"] = "completed"
    _write_manifest(manifest_path, manifest)
    logger.success(f"Experiment finished: {len(spec.instances)} instance(s), artifacts in {spec.out_dir}")
    return ExperimentResult(
        results=results,
        aggregates=aggregates,
        summaries=summaries,
        summary=frame,
        manifest_path=manifest_path,
    )
