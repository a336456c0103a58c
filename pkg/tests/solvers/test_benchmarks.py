"""Benchmark checks on the TTP corpus; set TTPQD_INSTANCE_DIR to run them."""

import numpy as np
import pytest

from ttpqd.harness.oracle import check_operator_closure
from ttpqd.instance.instance_io import load_instance
from ttpqd.solvers.solvers import SolverConfig, bmbea_run, run_solver

EIL51 = "eil51_n50_bounded-strongly-corr_01.ttp"
EIL51_SIMILAR = "eil51_n50_uncorr-similar-weights_01.ttp"
EIL51_UNCORR = "eil51_n50_uncorr_01.ttp"
PR152_SIMILAR = "pr152_n453_uncorr-similar-weights_01.ttp"

pytestmark = pytest.mark.integration


@pytest.fixture
def benchmark(instance_dir):
    """Load a corpus file by name, skipping when it is not available."""

    def _load(filename):
        path = instance_dir / filename
        if not path.exists():
            pytest.skip(f"{filename} not found in {instance_dir}")
        return load_instance(path)

    return _load


@pytest.fixture
def eil51(benchmark):
    return benchmark(EIL51)


def _best_z(inst, runs: int, **settings) -> list[float]:
    return [run_solver(inst, SolverConfig(seed=seed, **settings)).best.z for seed in range(runs)]


class TestEil51:
    """Test the solvers on the first benchmark instance."""

    def test_dimensions(self, eil51):
        assert eil51.n == 51
        assert eil51.m == 50

    def test_operator_closure(self, eil51, rng):
        report = check_operator_closure(eil51, 10_000, rng)
        assert report.ok, report.failures

    def test_initial_population_reaches_prefixed_grid(self, eil51, rng):
        result = bmbea_run(eil51, SolverConfig(iterations=0, seed=0), rng)
        assert len(result.grid) >= 1
        assert result.spec.f_star >= 426

    def test_reproduces_published_score(self, eil51):
        """Test that ten EAX + DP runs of 10^4 iterations reach 99.5% of the best known 4269.4."""
        best = max(run_solver(eil51, SolverConfig(iterations=10_000, seed=seed)).best.z for seed in range(10))
        assert best >= 4248


class TestSmallInstances:
    """Test the published comparisons on the other small instances."""

    def test_similar_weights_reproduction(self, benchmark):
        """Test that ten EAX + DP runs on eil51 with similar weights reach 1449."""
        inst = benchmark(EIL51_SIMILAR)
        assert max(_best_z(inst, 10, iterations=10_000)) >= 1449

    def test_eax_beats_two_opt(self, benchmark):
        """Test that with the DP packer the median EAX run is at least the median 2-OPT run."""
        inst = benchmark(EIL51_UNCORR)
        eax = _best_z(inst, 5, iterations=10_000, tsp_operator="eax", kp_operator="dp")
        two_opt = _best_z(inst, 5, iterations=10_000, tsp_operator="2opt", kp_operator="dp")
        assert np.median(eax) >= np.median(two_opt)

    def test_bmbea_beats_mu_plus_one(self, benchmark):
        """Test that map-elitism wins on mean z and keeps at least 5x the occupied cells."""
        inst = benchmark(PR152_SIMILAR)
        bmbea = [run_solver(inst, SolverConfig(iterations=10_000, seed=seed)) for seed in range(10)]
        baseline = [
            run_solver(inst, SolverConfig(iterations=10_000, seed=seed, algorithm="mu+1")) for seed in range(10)
        ]
        assert np.mean([r.best.z for r in bmbea]) >= np.mean([r.best.z for r in baseline])
        assert sum(r.distinct_cells() for r in bmbea) >= 5 * sum(r.distinct_cells() for r in baseline)
