"""Default solver and harness settings, overridable through TTPQD_* environment variables."""

import os

from dotenv import load_dotenv

# Load environment variables from .env file (if present)
load_dotenv()


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() == "true"


LOG_LEVEL = os.getenv("TTPQD_LOG_LEVEL", "INFO").upper()

# Archive
DEFAULT_ALPHA1 = float(os.getenv("TTPQD_ALPHA1", 0.05))
DEFAULT_ALPHA2 = float(os.getenv("TTPQD_ALPHA2", 0.20))
DEFAULT_DELTA1 = int(os.getenv("TTPQD_DELTA1", 20))
DEFAULT_DELTA2 = int(os.getenv("TTPQD_DELTA2", 20))
RELAX_EPSILON = float(os.getenv("TTPQD_RELAX_EPSILON", 1e-6))

PRESETS = {
    "balanced": {"alpha1": 0.05, "alpha2": 0.20},
    "unbalanced": {"alpha1": 0.02, "alpha2": 0.60},
}

# Observed envelope for thresholds derived from the initial population
RELAXED_ALPHA1_ENVELOPE = (0.04, 0.14)
RELAXED_ALPHA2_ENVELOPE = (0.11, 0.33)

# Solvers
DEFAULT_ITERATIONS = int(os.getenv("TTPQD_ITERATIONS", 10000))
DEFAULT_TIME_LIMIT = float(os.getenv("TTPQD_TIME_LIMIT", 3600.0))
DEFAULT_POP_SIZE = int(os.getenv("TTPQD_POP_SIZE", 50))
DEFAULT_EA_ITERATIONS = int(os.getenv("TTPQD_EA_ITERATIONS", 2000))
DEFAULT_INIT_GENERATIONS = int(os.getenv("TTPQD_INIT_GENERATIONS", 5000))
DEFAULT_INIT_STALL = int(os.getenv("TTPQD_INIT_STALL", 100))
DEFAULT_SEED = int(os.getenv("TTPQD_SEED", 0))

# Instances above this many cities compute distances on demand
MATRIX_THRESHOLD = int(os.getenv("TTPQD_MATRIX_THRESHOLD", 3000))

# Re-verify cached f/g/z and packing totals on every construction
DEBUG_CHECKS = _env_bool("TTPQD_DEBUG_CHECKS", "False")

# Experiment outputs
DEFAULT_OUT_DIR = os.getenv("TTPQD_OUT_DIR", "results")
SUMMARY_COLUMNS = ["instance", "tsp_op", "kp_op", "runs", "avg_z", "best_z", "mean_cpu_s"]
