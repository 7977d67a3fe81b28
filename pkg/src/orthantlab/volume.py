"""Spherical volume fractions: hit-or-miss Monte Carlo and a certified
recursion bound for the coordinate slabs.

``estimate_fraction`` is plain hit-or-miss sampling with a binomial error
bar.  ``recursion_bound`` unfolds the deterministic inequality

    |V_{k,d}(a)|  <=  |V_{k-1,d}(a)| + a * |V_{k-1,d-1}(a / sqrt(1-a^2))|

down to exactly known bases, producing a rigorous upper bound on the slab
volume fraction that the MC estimate can be checked against.

The inequality comes from slicing along the k-th coordinate; the slice
measure times the coarea factor is (1-s^2)**((d-3)/2) <= 1, so the step is
only valid for d >= 3.  The unfolding therefore stops at d = 2, where the
slab fractions on the circle are known in closed form (arcsin arcs), and at
k = 0, the nonnegative orthant with fraction 2**-d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sphere
from .streams import DEFAULT_CHUNKS, chunk_generators, run_chunks


@dataclass(frozen=True)
class VolumeEstimate:
    """Hit-or-miss estimate of |domain| / |S^{dim-1}|."""

    domain: sphere.DomainSpec
    n: int
    fraction: float
    stderr: float
    ci95: tuple[float, float]


@dataclass(frozen=True)
class RecursionBound:
    """Certified upper bound on the V_{k,d}(a) volume fraction."""

    k: int
    d: int
    a: float
    bound_fraction: float


class SlabParameterOverflow(ValueError):
    """The transformed slab parameter left [0, 1) during the unfolding."""

    def __init__(self, level: int, value: float):
        self.level = level
        self.value = value
        super().__init__(
            f"transformed slab parameter reached {value:.6g} >= 1 "
            f"after {level} recursion level(s)"
        )


def estimate_fraction(
    domain: sphere.DomainSpec,
    n: int,
    seed,
    threads: int = 1,
    n_chunks: int = DEFAULT_CHUNKS,
) -> VolumeEstimate:
    """Monte Carlo volume fraction of ``domain`` from ``n`` uniform samples.

    Sampling is split into ``n_chunks`` fixed chunks with independent
    substreams; the result is bit-identical for a given (seed, n_chunks)
    regardless of ``threads``.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    chunks = chunk_generators(seed, n, n_chunks)

    def one_chunk(i: int) -> int:
        size, rng = chunks[i]
        if size == 0:
            return 0
        pts = sphere.sample_uniform_sphere(domain.dim, rng, size)
        return int(np.count_nonzero(sphere.contains(domain, pts)))

    hits = sum(run_chunks(one_chunk, n_chunks, threads))
    frac = hits / n
    stderr = math.sqrt(frac * (1.0 - frac) / n)
    lo = max(0.0, frac - 1.96 * stderr)
    hi = min(1.0, frac + 1.96 * stderr)
    return VolumeEstimate(domain=domain, n=n, fraction=frac, stderr=stderr, ci95=(lo, hi))


def _shifted_param(a: float, level: int) -> float:
    # After j applications of a -> a/sqrt(1-a^2) the parameter is
    # a / sqrt(1 - j*a^2); guard stays with the iterated form for the
    # error report.
    denom = 1.0 - a * a
    if denom <= 0.0:
        raise SlabParameterOverflow(level, a)
    return a / math.sqrt(denom)


def recursion_bound(k: int, d: int, a: float, _cache: dict | None = None) -> RecursionBound:
    """Certified upper bound on |V_{k,d}(a)| / |S^{d-1}|.

    Raises :class:`SlabParameterOverflow` if any transformed parameter in
    the unfolding reaches 1 (the inequality chain is then vacuous).
    """
    if not 0 <= k <= d:
        raise ValueError("need 0 <= k <= d")
    if d < 1:
        raise ValueError("need d >= 1")
    if not 0.0 <= a < 1.0:
        raise ValueError("need 0 <= a < 1")
    cache: dict = {} if _cache is None else _cache
    value = _bound_fraction(k, d, float(a), 0, cache)
    return RecursionBound(k=k, d=d, a=float(a), bound_fraction=value)


def circle_slab_fraction(k: int, a: float) -> float:
    """Exact fraction of the circle in V_{k,2}(a), k in {0, 1, 2}."""
    if not 0 <= k <= 2:
        raise ValueError("need 0 <= k <= 2 on the circle")
    if not 0.0 <= a <= 1.0:
        raise ValueError("need 0 <= a <= 1")
    s = math.asin(a)
    if k == 0:
        return 0.25
    if k == 1:
        return 0.25 + s / (2.0 * math.pi)
    # k = 2: the two excluded arcs overlap only while a < sqrt(2)/2.
    if a * a <= 0.5:
        return 0.25 + s / math.pi
    return 2.0 * s / math.pi


def _bound_fraction(k: int, d: int, a: float, level: int, cache: dict) -> float:
    if k == 0:
        return 2.0 ** -d
    if a >= 1.0:
        raise SlabParameterOverflow(level, a)
    if d == 1:
        # Both slabs on S^0 = {-1, +1} contain exactly the point +1 for a < 1.
        return 0.5
    if d == 2:
        return circle_slab_fraction(k, a)
    key = (k, d, a)
    hit = cache.get(key)
    if hit is not None:
        return hit
    a_next = _shifted_param(a, level)
    cross_ratio = sphere.area_ratio(d - 2, d - 1)
    val = _bound_fraction(k - 1, d, a, level, cache) + a * cross_ratio * _bound_fraction(
        k - 1, d - 1, a_next, level + 1, cache
    )
    cache[key] = val
    return val


@dataclass(frozen=True)
class Lemma1Row:
    d: int
    a: float
    bound_fraction: float
    ratio: float  # bound_fraction * 2**d


@dataclass(frozen=True)
class Lemma1Report:
    """Scaling check of the full-slab bound at a_d = d**-exponent."""

    exponent: float
    rows: tuple[Lemma1Row, ...]
    max_ratio: float
    in_scaling_regime: bool  # exponent > 3/2, where the ratio should stay bounded


def lemma1_report(d_max: int, exponent: float) -> Lemma1Report:
    """Tabulate recursion_bound(d, d, d**-exponent) * 2**d for d = 1..d_max."""
    if d_max < 2:
        raise ValueError("d_max must be >= 2")
    cache: dict = {}
    rows = []
    for d in range(1, d_max + 1):
        # d = 1 would give a = 1 for any exponent; clip into the valid range.
        a = min(float(d) ** -exponent, 1.0 - 1e-12)
        rb = recursion_bound(d, d, a, _cache=cache)
        rows.append(Lemma1Row(d=d, a=a, bound_fraction=rb.bound_fraction, ratio=rb.bound_fraction * 2.0**d))
    return Lemma1Report(
        exponent=exponent,
        rows=tuple(rows),
        max_ratio=max(r.ratio for r in rows),
        in_scaling_regime=exponent > 1.5,
    )
