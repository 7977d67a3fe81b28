"""Numerical laboratory for the exit problem of d independent Brownian
motions from the complement of the negative orthant.

The survival probability decays like t**(-p_d/2) where p_d is tied to the
first Dirichlet eigenvalue lambda_1 of the orthant-complement cap on
S^(d-1) via lambda = p (p + d - 2).  The subpackages attack the same
quantities from independent directions so they can cross-check each other:

- fpt: path simulation, survival curves, tail-exponent fits
- bounds: closed-form lower bounds and Rayleigh-quotient upper bounds
- spectral: finite-difference eigensolver on S^2 (d = 3 only)
- volume: cap volume fractions, Monte Carlo and certified recursion bound
- sphere: domain definitions and uniform sphere sampling
- streams: reproducible chunked RNG substreams
"""

__version__ = "0.1.0"

from .bounds import (
    CutoffProfile,
    EigenvalueBounds,
    equivalence_ratio,
    lambda_from_p,
    optimize_cutoff,
    p_from_lambda,
    rayleigh_upper_bound,
    yamabe_lower_bound,
)
from .fpt import (
    SurvivalCurve,
    WalkConfig,
    fit_tail_exponent,
    occupation_times,
    sample_exit_times,
    survival_curve,
)
from .sphere import DomainSpec
from .spectral import richardson_extrapolate, solve_domain
from .volume import estimate_fraction, lemma1_report, recursion_bound

__all__ = [
    "CutoffProfile",
    "DomainSpec",
    "EigenvalueBounds",
    "SurvivalCurve",
    "WalkConfig",
    "equivalence_ratio",
    "estimate_fraction",
    "fit_tail_exponent",
    "lambda_from_p",
    "lemma1_report",
    "occupation_times",
    "optimize_cutoff",
    "p_from_lambda",
    "rayleigh_upper_bound",
    "recursion_bound",
    "richardson_extrapolate",
    "sample_exit_times",
    "solve_domain",
    "survival_curve",
    "yamabe_lower_bound",
]
