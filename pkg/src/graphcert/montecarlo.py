"""
Deterministic per-trial random streams and an order-preserving trial map.

Trial ``i`` of a run with master seed ``s`` draws from
``PCG64(SeedSequence(s, spawn_key=(i,)))``. The stream therefore depends only
on ``(s, i)``: results are identical whatever the number of workers or the
order in which chunks finish.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

MAX_SEED = 2**64 - 1


def trial_rng(seed: int, index: int) -> np.random.Generator:
    if not 0 <= seed <= MAX_SEED:
        raise ValueError("master seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _run_chunk(fn, seed: int, start: int, stop: int) -> list:
    return [fn(i, trial_rng(seed, i)) for i in range(start, stop)]


def _chunks(trials: int, parts: int) -> Sequence[tuple[int, int]]:
    parts = max(1, min(parts, trials))
    bounds = np.linspace(0, trials, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_trials(fn: Callable[[int, np.random.Generator], object], trials: int, seed: int, workers: int = 1) -> list:
    """Evaluate ``fn(i, rng_i)`` for ``i in range(trials)``; results in index order.

    ``fn`` must be picklable when ``workers > 1``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if workers <= 1:
        return _run_chunk(fn, seed, 0, trials)
    # several chunks per worker keeps the pool busy on uneven trial costs
    spans = _chunks(trials, 4 * workers)
    out: list = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_chunk, fn, seed, a, b) for a, b in spans]
        for fut in futures:
            out.extend(fut.result())
    return out
