"""Reproducible parallel random-number substreams and chunked execution.

Every Monte Carlo engine in this package splits its sample budget into a
fixed number of chunks.  Each chunk owns an independent generator spawned
from the run seed, and partial results are reduced in chunk order, so the
output depends only on (seed, chunk count) and never on how many worker
threads happen to execute the chunks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

# Fixed chunk count shared by the MC engines.  Changing it changes the
# random streams, so it is a constant, not a tuning knob.
DEFAULT_CHUNKS = 64

T = TypeVar("T")


def seed_sequence(seed) -> np.random.SeedSequence:
    """Coerce an int seed or an existing SeedSequence into a SeedSequence.

    A SeedSequence input is rebuilt from its entropy and spawn key so the
    returned object has a fresh child counter; spawning from it is then
    idempotent instead of advancing with every call.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=seed.entropy, spawn_key=seed.spawn_key)
    return np.random.SeedSequence(int(seed))


def substreams(seed, n: int) -> list[np.random.Generator]:
    """Spawn ``n`` independent generators from one seed.

    The children are derived with SeedSequence spawning, so stream ``i`` is
    the same no matter how many other streams exist or which thread uses it.
    """
    children = seed_sequence(seed).spawn(n)
    return [np.random.default_rng(c) for c in children]


def chunk_sizes(total: int, n_chunks: int) -> list[int]:
    """Split ``total`` items into ``n_chunks`` near-equal parts (empty ones kept)."""
    base, extra = divmod(total, n_chunks)
    return [base + (1 if i < extra else 0) for i in range(n_chunks)]


def default_threads() -> int:
    """Thread default: ORTHANT_LAB_THREADS if set, else 1."""
    raw = os.environ.get("ORTHANT_LAB_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_chunks(fn: Callable[[int], T], n_chunks: int, threads: int = 1) -> list[T]:
    """Evaluate ``fn(chunk_index)`` for every chunk, returning results in order.

    With ``threads > 1`` the chunks run on a thread pool; the returned list is
    still ordered by chunk index, so any reduction over it is independent of
    scheduling.
    """
    if threads <= 1 or n_chunks <= 1:
        return [fn(i) for i in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_chunks)))


def chunk_generators(seed, total: int, n_chunks: int = DEFAULT_CHUNKS):
    """Pair each chunk with its sample count and its own generator."""
    sizes = chunk_sizes(total, n_chunks)
    gens = substreams(seed, n_chunks)
    return list(zip(sizes, gens))


def ordered_sum(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Sum partial results in list order (fixed-order float reduction)."""
    acc = np.array(parts[0], copy=True)
    for p in parts[1:]:
        acc += p
    return acc
