"""Seeded, partition-invariant random streams.

Replicates are grouped into fixed-size blocks.  Each block draws from its own
Philox (counter-based) generator keyed by ``(seed, purpose, index, block)``, so
a block's numbers never depend on which worker evaluates it or in which order.
Results are collected in block order, which makes every tally bit-identical
for any thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

DEFAULT_BLOCK = 4096

SIMULATION = 0
CALIBRATION = 1

T = TypeVar("T")


def block_rng(seed: int, *key: int) -> np.random.Generator:
    if seed is None or int(seed) < 0:
        raise ValueError(f"an explicit nonnegative integer seed is required, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(reps: int, block: int = DEFAULT_BLOCK) -> list[int]:
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    full, rest = divmod(int(reps), block)
    return [block] * full + ([rest] if rest else [])


def map_blocks(fn: Callable[[int, int], T], reps: int, block: int = DEFAULT_BLOCK, threads: int = 1) -> list[T]:
    """Evaluate ``fn(block_index, block_size)`` for every block, in block order."""
    sizes = block_sizes(reps, block)
    if threads <= 1 or len(sizes) == 1:
        return [fn(i, s) for i, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))
