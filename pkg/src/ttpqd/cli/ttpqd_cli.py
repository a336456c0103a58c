import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import click
import numpy as np
from dotenv import load_dotenv
from loguru import logger

from ttpqd.archive.map_grid import load_snapshot, write_snapshot
from ttpqd.config.config import LOG_LEVEL, PRESETS
from ttpqd.core.ttp_core import format_solution
from ttpqd.errors import TtpError
from ttpqd.harness.experiment import (
    ExperimentSpec,
    resolve_settings,
    run_experiment,
    solver_config_from_settings,
    write_run_log,
)
from ttpqd.harness.oracle import run_all
from ttpqd.harness.render import HeatmapMode, render_heatmap, render_population_map
from ttpqd.harness.tables import AggregateMap
from ttpqd.instance.instance_io import load_instance
from ttpqd.solvers.solvers import Algorithm, run_solver

# Load environment variables from .env file (if present)
load_dotenv()

NAME = "ttpqd"
ASCII_LOGO = r"""
 __    __                     .___
_/  |__/  |_______   ______  __| _/
\   __\   __\____ \ / ____/ / __ |
 |  |  |  | |  |_> < <_|  |/ /_/ |
 |__|  |__| |   __/ \__   |\____ |
            |__|       |__|     \/
"""

LOG_LEVELS = ["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"]


# Try to get version from package metadata first, then fallback to __init__.py
try:
    __version__ = version(NAME)
except PackageNotFoundError:
    try:
        from ttpqd import __version__
    except ImportError:
        __version__ = "unknown"


def configure_logging(log_level: str) -> None:
    final_log_level = log_level.upper()
    logger.remove()  # Remove default handler
    logger.add(sys.stderr, level=final_log_level)
    logger.debug(f"Logging level set to: {final_log_level}")


def log_level_option(f):
    return click.option(
        "--log-level",
        "-l",
        type=click.Choice(LOG_LEVELS, case_sensitive=False),
        default=lambda: LOG_LEVEL,
        help="Set the logging level (default: INFO, or TTPQD_LOG_LEVEL env var)",
    )(f)


def solver_options(f):
    """Options shared by `solve` and `experiment`; unset options fall back to env, YAML, defaults."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="YAML file with settings keyed by option name"),
        click.option("--algorithm", type=click.Choice([a.value for a in Algorithm]),
                     help="Outer algorithm (default: bmbea)"),
        click.option("--tsp-op", type=click.Choice(["eax", "2opt"]), help="Tour operator (default: eax)"),
        click.option("--kp-op", type=click.Choice(["dp", "ea"]), help="Packing operator (default: dp)"),
        click.option("--iters", type=click.IntRange(min=0), help="Main-loop iterations (default: 10000)"),
        click.option("--time-limit", type=float, help="Wall-clock limit per run in seconds (default: 3600)"),
        click.option("--seed", type=int, help="Random seed (default: TTPQD_SEED or 0)"),
        click.option("--grid-mode", type=click.Choice(["prefixed", "relaxed"]),
                     help="Fixed alpha thresholds or thresholds from the initial population"),
        click.option("--preset", type=click.Choice(sorted(PRESETS)), help="Named alpha1/alpha2 pair"),
        click.option("--alpha1", type=float, help="Tour-length gap above f* (default: 0.05)"),
        click.option("--alpha2", type=float, help="Profit gap below g* (default: 0.20)"),
        click.option("--delta1", type=click.IntRange(min=1), help="Cells along the f axis (default: 20)"),
        click.option("--delta2", type=click.IntRange(min=1), help="Cells along the g axis (default: 20)"),
        click.option("--fstar", type=float, help="Known optimal tour length f*"),
        click.option("--tours-file", type=click.Path(exists=True, dir_okay=False),
                     help="Initial tours, one comma-separated permutation per line"),
        click.option("--pop-size", type=click.IntRange(min=2), help="Initial population size (default: 50)"),
        click.option("--ea-iters", type=click.IntRange(min=0), help="(1+1) EA iterations per offspring"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


@click.group(invoke_without_command=True)
@click.version_option(__version__, prog_name=NAME)
@click.pass_context
def cli(ctx):
    """
    ttpqd - Quality diversity for the Traveling Thief Problem.

    Runs a bi-level MAP-Elites EA (or a (mu+1) EA baseline) on TTP benchmark instances
    and exports archives, heatmaps and summary tables.

    Use 'ttpqd help' for detailed information and examples.
    """
    click.echo(click.style(f"{ASCII_LOGO}\n", fg="cyan"))
    if __version__ != "unknown":
        click.echo(click.style(f"ttpqd version: {__version__}\n", fg="green"))
    else:
        click.echo(click.style(f"ttpqd version: {__version__}\n", fg="red"))
    if ctx.invoked_subcommand is None:
        click.echo(cli.get_help(ctx))


@cli.command("help")
def help_command():
    """Show detailed help information and usage examples."""
    ctx = click.Context(cli)

    click.echo(cli.get_help(ctx))

    click.echo("\n" + "=" * 70)
    click.echo(click.style("\n📚 DETAILED INFORMATION\n", fg="cyan", bold=True))

    click.echo(click.style("About ttpqd:", fg="yellow", bold=True))
    click.echo("  ttpqd keeps the best TTP solution for every (tour length, profit) cell of a")
    click.echo("  grid anchored at the optimal tour length f* and the optimal knapsack profit g*.\n")

    click.echo(click.style("Available Commands:", fg="yellow", bold=True))
    click.echo("  • solve      - One run on one instance")
    click.echo("  • experiment - Repeated seeded runs, heatmaps and a summary table")
    click.echo("  • render     - Heatmaps from saved map snapshots")
    click.echo("  • oracle     - Brute-force checks of the exact operators and the archive")
    click.echo("  • help       - Display this detailed help information")
    click.echo("  • --version  - Show the installed version of ttpqd\n")

    click.echo(click.style("Operators:", fg="yellow", bold=True))
    click.echo("  --tsp-op eax | 2opt     Edge assembly crossover or a random 2-OPT move")
    click.echo("  --kp-op  dp  | ea       Exact packing DP for the tour, or a (1+1) EA\n")

    click.echo(click.style("📖 Usage Examples:", fg="yellow", bold=True))
    click.echo("  1. One run with the defaults (EAX + DP, 20x20 grid):")
    click.echo("     $ ttpqd solve --instance eil51_n50_bounded-strongly-corr_01.ttp\n")

    click.echo("  2. Ten runs with thresholds taken from the initial population:")
    click.echo("     $ ttpqd experiment --instance eil51_n50.ttp --runs 10 --grid-mode relaxed\n")

    click.echo("  3. Baseline (mu+1) EA with byte-stable outputs:")
    click.echo("     $ ttpqd experiment --instance eil51_n50.ttp --algorithm mu+1 --no-timing\n")

    click.echo("  4. Re-render heatmaps from saved snapshots:")
    click.echo("     $ ttpqd render results/eil51_n50/map_*.json --out-dir figures\n")

    click.echo("  5. Run the verifiers:")
    click.echo("     $ ttpqd oracle --pwt-cases 200 --archive-cases 100000\n")

    click.echo(click.style("🔧 Environment Variables:", fg="yellow", bold=True))
    click.echo("  Settings resolve as: command-line flag > environment variable > --config YAML > default")
    click.echo("  • TTPQD_LOG_LEVEL         - Default log level")
    click.echo("  • TTPQD_SEED              - Random seed")
    click.echo("  • TTPQD_ITERATIONS        - Main-loop iterations")
    click.echo("  • TTPQD_TIME_LIMIT        - Wall-clock limit per run (seconds)")
    click.echo("  • TTPQD_ALPHA1/ALPHA2     - Grid gaps")
    click.echo("  • TTPQD_DELTA1/DELTA2     - Grid cells per axis")
    click.echo("  • TTPQD_POP_SIZE          - Initial population size")
    click.echo("  • TTPQD_EA_ITERATIONS     - (1+1) EA iterations per offspring")
    click.echo("  • TTPQD_DEBUG_CHECKS      - Re-verify cached scores (True/False)\n")

    click.echo("=" * 70 + "\n")


@cli.command("solve")
@click.option("--instance", "-i", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Benchmark .ttp file")
@click.option("--out-dir", "-o", type=click.Path(file_okay=False), help="Write the run log, map and best solution here")
@solver_options
@log_level_option
def solve_command(instance: str, out_dir: str | None, config_path: str | None, log_level: str, **flags):
    """
    Run one solver on one instance and report the best solution.

    Examples:
      ttpqd solve -i eil51_n50.ttp
      ttpqd solve -i eil51_n50.ttp --tsp-op 2opt --kp-op ea --iters 2000
    """
    configure_logging(log_level)
    try:
        cfg = solver_config_from_settings(resolve_settings(flags, config_path))
        inst = load_instance(instance)
        result = run_solver(inst, cfg, np.random.default_rng(cfg.seed))
        if out_dir is not None:
            target = Path(out_dir)
            target.mkdir(parents=True, exist_ok=True)
            write_run_log(target / "run_0.jsonl", result)
            write_snapshot(result.final_grid(), target / "map_0.json", target / "map_0.csv")
            (target / "best_solution.txt").write_text(format_solution(result.best), encoding="utf-8")
            if result.algorithm is Algorithm.MU_PLUS_ONE:
                render_population_map(result, target / "population_0.svg")
    except TtpError as e:
        logger.error(f"{type(e).__name__}: {e}")
        raise click.ClickException(str(e)) from e

    best = result.best
    grid = result.final_grid()
    click.echo(f"instance:  {inst.name}")
    click.echo(f"best z:    {best.z}")
    click.echo(f"tour f:    {best.f}")
    click.echo(f"profit g:  {best.g}")
    click.echo(f"cells:     {len(grid)} of {grid.spec.delta1 * grid.spec.delta2} (QD score {grid.qd_score()})")


@cli.command("experiment")
@click.option("--instance", "-i", type=click.Path(exists=True, dir_okay=False), multiple=True,
              help="Benchmark .ttp file (repeatable)")
@click.option("--runs", "-r", type=click.IntRange(min=1), help="Independent runs per instance (default: 1)")
@click.option("--jobs", "-j", type=click.IntRange(min=1), help="Parallel worker processes (default: 1)")
@click.option("--out-dir", "-o", type=click.Path(file_okay=False), help="Output directory (default: results)")
@click.option("--no-timing", is_flag=True, default=None, help="Leave timings out for byte-stable outputs")
@solver_options
@log_level_option
def experiment_command(config_path: str | None, log_level: str, **flags):
    """
    Run every instance several times and export maps, heatmaps and summary.csv.

    Examples:
      ttpqd experiment -i eil51_n50.ttp --runs 10 --jobs 4
      ttpqd experiment --config experiment.yaml --seed 7
    """
    configure_logging(log_level)
    flags["instance"] = list(flags["instance"]) or None
    try:
        spec = ExperimentSpec.from_settings(resolve_settings(flags, config_path))
        outcome = run_experiment(spec)
    except TtpError as e:
        logger.error(f"{type(e).__name__}: {e}")
        raise click.ClickException(str(e)) from e

    click.echo(outcome.summary.to_string(index=False))
    click.echo(f"\nArtifacts written to {spec.out_dir}")


@cli.command("render")
@click.argument("snapshots", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["quality", "frequency", "both"]), default="both",
              help="Which heatmap(s) to draw (default: both)")
@click.option("--instance", "-i", type=click.Path(exists=True, dir_okay=False),
              help="Recompute and check every stored solution against this instance")
@click.option("--out-dir", "-o", type=click.Path(file_okay=False), default=".", help="Output directory")
@log_level_option
def render_command(snapshots: tuple[str, ...], mode: str, instance: str | None, out_dir: str, log_level: str):
    """
    Aggregate saved map snapshots (map_<k>.json) and draw SVG heatmaps.

    Examples:
      ttpqd render results/eil51_n50/map_*.json -o figures
    """
    configure_logging(log_level)
    try:
        inst = load_instance(instance) if instance else None
        grids = [load_snapshot(Path(p), inst) for p in snapshots]
    except TtpError as e:
        logger.error(f"{type(e).__name__}: {e}")
        raise click.ClickException(str(e)) from e

    aggregate = AggregateMap.from_grids(grids)
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    modes = [HeatmapMode.QUALITY, HeatmapMode.FREQUENCY] if mode == "both" else [HeatmapMode(mode)]
    for heatmap_mode in modes:
        path = target / f"{heatmap_mode.value}.svg"
        render_heatmap(aggregate, heatmap_mode, path)
        click.echo(f"Wrote {path}")


@cli.command("oracle")
@click.option("--pwt-cases", type=click.IntRange(min=0), default=200, help="Random PWT DP cases")
@click.option("--kp-cases", type=click.IntRange(min=0), default=200, help="Random knapsack DP cases")
@click.option("--closure-cases", type=click.IntRange(min=0), default=10_000, help="EAX / 2-OPT applications")
@click.option("--archive-cases", type=click.IntRange(min=0), default=100_000, help="Synthetic archive insertions")
@click.option("--instance", "-i", type=click.Path(exists=True, dir_okay=False),
              help="Instance for the operator closure check (default: random 51 cities)")
@click.option("--seed", type=int, default=0, help="Random seed")
@log_level_option
def oracle_command(pwt_cases, kp_cases, closure_cases, archive_cases, instance, seed, log_level):
    """
    Check the exact operators and the archive against brute force; exit 1 on any mismatch.
    """
    configure_logging(log_level)
    closure_instance = load_instance(instance) if instance else None
    reports = run_all(
        np.random.default_rng(seed),
        pwt_cases=pwt_cases,
        kp_cases=kp_cases,
        closure_cases=closure_cases,
        archive_cases=archive_cases,
        closure_instance=closure_instance,
    )
    for report in reports:
        status = click.style("ok", fg="green") if report.ok else click.style("FAILED", fg="red")
        click.echo(f"{report.name:<18} {report.cases:>7} cases  {status}")
    if not all(report.ok for report in reports):
        raise click.ClickException("oracle mismatches found")


if __name__ == "__main__":
    cli()
