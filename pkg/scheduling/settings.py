"""
Default settings for delayshare runs.

Every value here can be overridden per call (SamplingPlan fields, function
arguments) or from the command line.
"""

import os
from typing import Optional

import psutil

from scheduling.errors import DomainError

# Largest player count solved by full subset enumeration
EXACT_CUTOFF = 20

# Largest support product enumerated by the exact expectation oracle
EXACT_BUDGET = 10 ** 7

# Coalition estimates are memoized only up to this many activities
CACHE_MAX_PLAYERS = 24

# Rows per batch when tabulating 2^n deterministic coalition values
TABULATE_BATCH = 1 << 15

# Work units handed to a worker; fixed so results do not depend on --workers
PERMUTATION_CHUNK = 256
RUN_CHUNK = 8

# Rejection sampling of delayed realizations
ATTEMPT_BUDGET = 10 ** 6
MIN_ACCEPTANCE_RATE = 1e-4
REALIZATION_BATCH = 256

DEFAULT_M = 1000
DEFAULT_M1 = 1000
DEFAULT_ALPHA = 0.05
DEFAULT_RUNS = 1000

KDE_GRID_POINTS = 512

SEED_ENV_VAR = "DELAYSHARE_SEED"


def resolve_seed(seed: Optional[int] = None) -> int:
    """Explicit seed, else $DELAYSHARE_SEED, else 0."""
    if seed is not None:
        return int(seed)
    env_value = os.environ.get(SEED_ENV_VAR)
    if env_value:
        return int(env_value)
    return 0


def resolve_workers(workers: Optional[int]) -> int:
    """None or 1 runs inline; 0 means one worker per physical core."""
    if workers is None:
        return 1
    if workers < 0:
        raise DomainError(f"workers must be >= 0, got {workers}")
    if workers == 0:
        return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    return workers
