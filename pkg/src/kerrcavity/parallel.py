"""Deterministic RNG streams and a worker pool for independent work units.

Every unit (trajectory chunk, grid cell, random seed) gets its own generator
keyed by ``(master_seed, unit_index)``, so results never depend on how units
are spread over workers. Results are always returned in unit order.
"""

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

WORKERS_ENV = "KERRCAVITY_WORKERS"


def unit_rng(master_seed, *unit_key):
    """Generator for one work unit; independent of scheduling."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in unit_key))
    return np.random.Generator(np.random.PCG64(ss))


def resolve_workers(workers=None):
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    if workers is None:
        return 1
    return max(1, int(workers))


def map_units(fn, args_list, workers=None):
    """Apply ``fn`` to each argument tuple; results in input order."""
    n = resolve_workers(workers)
    args_list = list(args_list)
    if n == 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=min(n, len(args_list))) as pool:
        futs = [pool.submit(fn, *a) for a in args_list]
        return [f.result() for f in futs]
