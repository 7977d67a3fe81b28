"""Sphere geometry kernel: sampling, domain membership, surface measures.

Points on the unit sphere S^{d-1} are plain numpy arrays: a single point is
a length-d vector with unit Euclidean norm, a batch is an (n, d) array of
unit rows.  All predicates accept either form.

The domain family is the one needed by the exit-time problem: the
complement U_d of the negative orthant, the negative orthant itself, the
coordinate slabs used by the volume recursion, and the hemisphere / lune
validation domains for the spectral solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

UNIT_NORM_TOL = 1e-12

#: Domain tags.
ORTHANT_COMPLEMENT = "orthant_complement"
NEGATIVE_ORTHANT = "negative_orthant"
SIGMA_SLAB = "sigma_slab"
V_SLAB = "v_slab"
HEMISPHERE = "hemisphere"
LUNE = "lune"

_TAGS = (ORTHANT_COMPLEMENT, NEGATIVE_ORTHANT, SIGMA_SLAB, V_SLAB, HEMISPHERE, LUNE)


@dataclass(frozen=True)
class DomainSpec:
    """A tagged spherical subdomain of S^{dim-1}.

    Parameters are only meaningful for some tags: ``a`` (slab half-width)
    for sigma/v slabs, ``k`` (number of widened coordinates) for v slabs,
    ``beta`` (dihedral angle in radians) for lunes.
    """

    tag: str
    dim: int
    a: float | None = None
    k: int | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown domain tag {self.tag!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        needs_a = self.tag in (SIGMA_SLAB, V_SLAB)
        if needs_a:
            if self.a is None:
                raise ValueError(f"{self.tag} requires slab parameter a")
            if not 0.0 <= self.a <= 1.0:
                raise ValueError("slab parameter a must lie in [0, 1]")
        elif self.a is not None:
            raise ValueError(f"{self.tag} takes no slab parameter")
        if self.tag == V_SLAB:
            if self.k is None:
                raise ValueError("v_slab requires k")
            if not 0 <= self.k <= self.dim:
                raise ValueError("k must lie in [0, dim]")
        elif self.k is not None:
            raise ValueError(f"{self.tag} takes no k")
        if self.tag == LUNE:
            if self.beta is None:
                raise ValueError("lune requires beta")
            if not 0.0 < self.beta <= 2.0 * math.pi:
                raise ValueError("beta must lie in (0, 2*pi]")
            if self.dim < 2:
                raise ValueError("lune needs dim >= 2")
        elif self.beta is not None:
            raise ValueError(f"{self.tag} takes no beta")

    # Convenience constructors -------------------------------------------------

    @classmethod
    def orthant_complement(cls, dim: int) -> "DomainSpec":
        return cls(ORTHANT_COMPLEMENT, dim)

    @classmethod
    def negative_orthant(cls, dim: int) -> "DomainSpec":
        return cls(NEGATIVE_ORTHANT, dim)

    @classmethod
    def sigma_slab(cls, dim: int, a: float) -> "DomainSpec":
        return cls(SIGMA_SLAB, dim, a=float(a))

    @classmethod
    def v_slab(cls, k: int, dim: int, a: float) -> "DomainSpec":
        return cls(V_SLAB, dim, a=float(a), k=int(k))

    @classmethod
    def hemisphere(cls, dim: int) -> "DomainSpec":
        return cls(HEMISPHERE, dim)

    @classmethod
    def lune(cls, dim: int, beta: float) -> "DomainSpec":
        return cls(LUNE, dim, beta=float(beta))


def sample_uniform_sphere(d: int, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Uniform points on S^{d-1} by normalizing standard Gaussian vectors.

    Returns a length-d vector when ``n`` is None, else an (n, d) batch.
    Rejection-free and isotropic by construction; cost is linear in d.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    size = (1, d) if n is None else (int(n), d)
    g = rng.standard_normal(size)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # A zero draw has probability 0; resample defensively if it ever happens.
    while np.any(norms == 0.0):
        bad = norms[:, 0] == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    pts = g / norms
    return pts[0] if n is None else pts


def contains(domain: DomainSpec, x: np.ndarray) -> np.ndarray | bool:
    """Membership of point(s) ``x`` in ``domain``.

    Boundary convention: the orthant complement is the complement of the
    *open* negative orthant, so points with a zero coordinate and the rest
    nonpositive count as members (a measure-zero set; keeping it closed
    makes classification deterministic).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.shape[-1] != domain.dim:
        raise ValueError(f"point dimension {pts.shape[-1]} != domain dim {domain.dim}")

    tag = domain.tag
    if tag == ORTHANT_COMPLEMENT:
        res = (pts >= 0.0).any(axis=-1)
    elif tag == NEGATIVE_ORTHANT:
        res = (pts < 0.0).all(axis=-1)
    elif tag == SIGMA_SLAB:
        res = (pts >= -domain.a).all(axis=-1)
    elif tag == V_SLAB:
        k = domain.k
        first = (pts[..., :k] >= -domain.a).all(axis=-1) if k > 0 else np.ones(len(pts), bool)
        rest = (pts[..., k:] >= 0.0).all(axis=-1) if k < domain.dim else np.ones(len(pts), bool)
        res = first & rest
    elif tag == HEMISPHERE:
        res = pts[..., -1] > 0.0
    elif tag == LUNE:
        az = np.arctan2(pts[..., 1], pts[..., 0])
        az = np.where(az < 0.0, az + 2.0 * math.pi, az)
        off_axis = (pts[..., 0] != 0.0) | (pts[..., 1] != 0.0)
        res = off_axis & (az > 0.0) & (az < domain.beta)
    else:  # pragma: no cover - tags validated in DomainSpec
        raise ValueError(tag)
    return bool(res[0]) if single else res


def log_sphere_area(d: int) -> float:
    """log of the surface measure of S^d in R^{d+1}."""
    if d < 0:
        raise ValueError("sphere dimension must be >= 0")
    return math.log(2.0) + 0.5 * (d + 1) * math.log(math.pi) - float(gammaln(0.5 * (d + 1)))


def sphere_area(d: int) -> float:
    """Surface measure of the d-sphere S^d (circle: d=1 -> 2*pi).

    Evaluated through log-gamma so large dimensions neither overflow nor
    lose the ratios needed elsewhere.
    """
    return math.exp(log_sphere_area(d))


def area_ratio(d_num: int, d_den: int) -> float:
    """sphere_area(d_num) / sphere_area(d_den), computed in log space."""
    return math.exp(log_sphere_area(d_num) - log_sphere_area(d_den))


def orthant_complement_fraction(dim: int) -> float:
    """Exact volume fraction of the orthant complement U_dim on S^{dim-1}.

    By sign symmetry of the uniform measure the closed negative orthant
    carries fraction 2**-dim, so its complement carries 1 - 2**-dim.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return -math.expm1(-dim * math.log(2.0))
