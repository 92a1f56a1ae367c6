"""
Configuration settings for causal_fusion.

Values can be overridden through the environment or a local .env file.
These settings are the defaults picked up by the pydantic config models
(EmccConfig, BenchConfig, ...) and by the command-line front end.
"""

import os

from dotenv import load_dotenv

load_dotenv()

# EMCC settings
DEFAULT_RUNS = int(os.environ.get("CAUSAL_FUSION_RUNS", 300))
DEFAULT_MAX_ITERATIONS = int(os.environ.get("CAUSAL_FUSION_MAX_ITERATIONS", 500))
DEFAULT_LL_TOLERANCE = float(os.environ.get("CAUSAL_FUSION_LL_TOLERANCE", 1e-6))
DEFAULT_SEED = int(os.environ.get("CAUSAL_FUSION_SEED", 0))
DEFAULT_THREADS = int(os.environ.get("CAUSAL_FUSION_THREADS", 1))

# Per-record log-likelihood gap to the best run accepted by near-best aggregation (0: strict)
DEFAULT_GAP_PER_RECORD = 0.0
# Near-best gap of the benchmark batches
BENCH_GAP_PER_RECORD = 1e-5
# Gain below which a run still short of the maximum likelihood counts as stalled
DEFAULT_STALL_TOLERANCE = 1e-9
# Relative jitter applied to a run that stalls below the global maximum
SADDLE_PERTURBATION = 0.01

# Numerical tolerances
PMF_TOLERANCE = 1e-9
LIKELIHOOD_TOLERANCE = 1e-6

# Oracle and benchmark settings
DEFAULT_ORACLE_BUDGET = int(os.environ.get("CAUSAL_FUSION_ORACLE_BUDGET", 200_000))
DEFAULT_SELECTOR_ATTEMPTS = int(os.environ.get("CAUSAL_FUSION_SELECTOR_ATTEMPTS", 1000))
DEFAULT_EDGE_PROBABILITY = 0.3
DEFAULT_MAX_EXO_CARD = 64

# Unselected count used for the P(S=0) -> 1 limit, as a multiple of N_{S=1}
WORST_BIAS_MULTIPLIER = 1_000_000

# Logging
LOG_LEVEL = os.environ.get("CAUSAL_FUSION_LOG_LEVEL", "INFO")
