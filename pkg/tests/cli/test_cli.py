"""Tests for the ttpqd CLI."""

from unittest.mock import patch

import pytest
from click.testing import CliRunner

from ttpqd.cli.ttpqd_cli import cli
from ttpqd.harness.oracle import OracleReport
from ttpqd.instance.instance_io import serialize_instance

FAST = ["--iters", "10", "--pop-size", "4", "--grid-mode", "relaxed", "--ea-iters", "10"]


@pytest.fixture
def runner():
    """Provide a CLI test runner."""
    return CliRunner()


@pytest.fixture
def octagon_file(tmp_path, octagon):
    path = tmp_path / "octagon_n10_uncorr_01.ttp"
    path.write_text(serialize_instance(octagon), encoding="utf-8")
    return path


class TestCLIBasics:
    """Test basic CLI functionality."""

    def test_cli_help(self, runner):
        """Test that --help flag works."""
        result = runner.invoke(cli, ["--help"])
        assert result.exit_code == 0
        assert "Commands:" in result.output

    def test_cli_version(self, runner):
        """Test that --version flag works."""
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "version" in result.output.lower()

    def test_cli_no_args_shows_help(self, runner):
        """Test that running CLI without args shows help."""
        result = runner.invoke(cli, [])
        assert result.exit_code == 0
        assert "Commands:" in result.output
        assert "ttpqd version:" in result.output

    def test_help_command(self, runner):
        """Test the help command."""
        result = runner.invoke(cli, ["help"])
        assert result.exit_code == 0
        assert "Available Commands:" in result.output
        assert "TTPQD_SEED" in result.output

    def test_invalid_log_level(self, runner, octagon_file):
        """Test that an unknown log level is rejected."""
        result = runner.invoke(cli, ["solve", "-i", str(octagon_file), "--log-level", "LOUD"])
        assert result.exit_code == 2


class TestSolveCommand:
    """Test the solve command."""

    def test_solve_help(self, runner):
        result = runner.invoke(cli, ["solve", "--help"])
        assert result.exit_code == 0
        assert "Run one solver on one instance" in result.output
        assert "--tsp-op" in result.output

    def test_solve(self, runner, octagon_file, tmp_path):
        out = tmp_path / "solve"
        result = runner.invoke(cli, ["solve", "-i", str(octagon_file), "-o", str(out), *FAST])
        assert result.exit_code == 0, result.output
        assert "best z:" in result.output
        assert "cells:" in result.output
        for name in ["run_0.jsonl", "map_0.json", "map_0.csv", "best_solution.txt"]:
            assert (out / name).exists(), name
        assert (out / "best_solution.txt").read_text().startswith("1,")

    def test_solve_mu_plus_one(self, runner, octagon_file, tmp_path):
        out = tmp_path / "solve"
        result = runner.invoke(
            cli, ["solve", "-i", str(octagon_file), "-o", str(out), "--algorithm", "mu+1", *FAST]
        )
        assert result.exit_code == 0, result.output
        assert (out / "population_0.svg").exists()

    def test_missing_instance(self, runner, tmp_path):
        result = runner.invoke(cli, ["solve", "-i", str(tmp_path / "nope.ttp")])
        assert result.exit_code == 2

    def test_malformed_instance(self, runner, tmp_path):
        path = tmp_path / "broken.ttp"
        path.write_text("PROBLEM NAME: broken\n", encoding="utf-8")
        result = runner.invoke(cli, ["solve", "-i", str(path), *FAST])
        assert result.exit_code == 1
        assert "Error:" in result.output

    def test_non_numeric_item_field(self, runner, tmp_path, rectangle_text):
        path = tmp_path / "rectangle_n3_x.ttp"
        path.write_text(rectangle_text.replace("1\t10\t5\t2", "1\tabc\t5\t2"), encoding="utf-8")
        result = runner.invoke(cli, ["solve", "-i", str(path), *FAST])
        assert result.exit_code == 1
        assert "cannot parse profit" in result.output
        assert not isinstance(result.exception, ValueError)

    def test_unreachable_grid(self, runner, octagon_file):
        result = runner.invoke(
            cli, ["solve", "-i", str(octagon_file), *FAST, "--grid-mode", "prefixed", "--fstar", "1.0"]
        )
        assert result.exit_code == 1


class TestExperimentCommand:
    """Test the experiment command."""

    def test_experiment(self, runner, octagon_file, tmp_path):
        out = tmp_path / "exp"
        result = runner.invoke(
            cli,
            ["experiment", "-i", str(octagon_file), "-r", "2", "-o", str(out), "--no-timing", *FAST],
        )
        assert result.exit_code == 0, result.output
        assert "octagon_n10_uncorr_01" in result.output
        assert (out / "summary.csv").exists()
        assert (out / "manifest.json").exists()

    def test_experiment_from_yaml(self, runner, octagon_file, tmp_path):
        config = tmp_path / "experiment.yaml"
        config.write_text(
            f"instance: [{octagon_file}]\nruns: 1\nout_dir: {tmp_path / 'yaml'}\n"
            "iters: 5\npop_size: 4\ngrid_mode: relaxed\n",
            encoding="utf-8",
        )
        result = runner.invoke(cli, ["experiment", "--config", str(config)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "yaml" / "summary.csv").exists()

    def test_experiment_without_instance(self, runner):
        result = runner.invoke(cli, ["experiment", "--iters", "1"])
        assert result.exit_code == 1
        assert "no instance" in result.output


class TestRenderCommand:
    """Test the render command."""

    def test_render_snapshots(self, runner, octagon_file, tmp_path):
        out = tmp_path / "solve"
        runner.invoke(cli, ["solve", "-i", str(octagon_file), "-o", str(out), *FAST])
        figures = tmp_path / "figures"
        result = runner.invoke(
            cli, ["render", str(out / "map_0.json"), "-i", str(octagon_file), "-o", str(figures)]
        )
        assert result.exit_code == 0, result.output
        assert (figures / "quality.svg").exists()
        assert (figures / "frequency.svg").exists()

    def test_render_single_mode(self, runner, octagon_file, tmp_path):
        out = tmp_path / "solve"
        runner.invoke(cli, ["solve", "-i", str(octagon_file), "-o", str(out), *FAST])
        result = runner.invoke(
            cli, ["render", str(out / "map_0.json"), "--mode", "frequency", "-o", str(tmp_path)]
        )
        assert result.exit_code == 0
        assert not (tmp_path / "quality.svg").exists()

    def test_render_rejects_bad_snapshot(self, runner, tmp_path):
        path = tmp_path / "map.json"
        path.write_text("{}", encoding="utf-8")
        result = runner.invoke(cli, ["render", str(path)])
        assert result.exit_code == 1


class TestOracleCommand:
    """Test the oracle command."""

    def test_oracle_small(self, runner):
        result = runner.invoke(
            cli,
            ["oracle", "--pwt-cases", "5", "--kp-cases", "5", "--closure-cases", "20", "--archive-cases", "200"],
        )
        assert result.exit_code == 0, result.output
        assert "pwt_dp" in result.output
        assert "FAILED" not in result.output

    def test_oracle_failure_exit_code(self, runner):
        broken = OracleReport("pwt_dp", cases=1, failures=["mismatch"])
        with patch("ttpqd.cli.ttpqd_cli.run_all", return_value=[broken]):
            result = runner.invoke(cli, ["oracle"])
        assert result.exit_code == 1
        assert "FAILED" in result.output
