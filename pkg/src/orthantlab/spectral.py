"""Finite-difference Dirichlet eigensolver for the Laplace-Beltrami
operator on S^2.

Second-order 5-point stencil on a (theta, phi) tensor grid with periodic
azimuth, poles collapsed to single degrees of freedom that average the
adjacent ring.  The operator is made self-adjoint by conjugating with the
square root of the quadrature weights (sin(theta) per interior node, an
exactly matching weight at the poles), after which the smallest eigenvalue
comes from inverse power iteration on the Dirichlet-interior principal
submatrix with one sparse LU factorization.

Supported domains: the orthant-complement cap (Dirichlet on the closed
negative octant), the upper hemisphere (Dirichlet on z <= 0), and vertical
lunes of dihedral angle beta (Dirichlet off the open azimuth interval and
at both poles).  Eigenvalue oracles: hemisphere 2 (eigenfunction cos
theta), lune mu*(mu+1) with mu = pi/beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from . import sphere

_ANGLE_TOL = 1e-12


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"inverse iteration stalled after {iterations} iterations "
            f"(relative residual {residual:.3e})"
        )


@dataclass(frozen=True)
class GridSpec:
    n_theta: int
    n_phi: int
    domain: sphere.DomainSpec

    def __post_init__(self):
        if self.n_theta < 16:
            raise ValueError("need n_theta >= 16")
        if self.n_phi < 32 or self.n_phi % 2:
            raise ValueError("need even n_phi >= 32")
        if self.domain.dim != 3:
            raise ValueError("spectral solver works on S^2 (dim = 3) only")
        if self.domain.tag not in (
            sphere.ORTHANT_COMPLEMENT,
            sphere.HEMISPHERE,
            sphere.LUNE,
        ):
            raise ValueError(f"unsupported domain tag {self.domain.tag!r}")

    @property
    def h_theta(self) -> float:
        return math.pi / self.n_theta

    @property
    def h_phi(self) -> float:
        return 2.0 * math.pi / self.n_phi

    @property
    def n_nodes(self) -> int:
        # north pole, (n_theta - 1) interior rings, south pole
        return 2 + (self.n_theta - 1) * self.n_phi


def node_angles(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """(theta, phi) for every node; poles get phi = 0 by convention."""
    th = np.empty(grid.n_nodes)
    ph = np.zeros(grid.n_nodes)
    th[0] = 0.0
    th[-1] = math.pi
    rings = np.arange(1, grid.n_theta) * grid.h_theta
    phis = np.arange(grid.n_phi) * grid.h_phi
    th[1:-1] = np.repeat(rings, grid.n_phi)
    ph[1:-1] = np.tile(phis, grid.n_theta - 1)
    return th, ph


def dirichlet_mask(grid: GridSpec) -> np.ndarray:
    """True at nodes where the eigenfunction is pinned to zero.

    Membership is decided on the angle grid (cos/sin against a 1e-12
    tolerance) so nodes lying exactly on coordinate planes land on the
    closed boundary despite floating-point rounding of pi multiples.
    """
    th, ph = node_angles(grid)
    ct, st = np.cos(th), np.sin(th)
    cp, sp = np.cos(ph), np.sin(ph)
    tag = grid.domain.tag
    if tag == sphere.HEMISPHERE:
        mask = ct <= _ANGLE_TOL
    elif tag == sphere.ORTHANT_COMPLEMENT:
        # closed negative octant: x <= 0, y <= 0, z <= 0
        x_np = st * cp
        y_np = st * sp
        mask = (x_np <= _ANGLE_TOL) & (y_np <= _ANGLE_TOL) & (ct <= _ANGLE_TOL)
        mask[0] = False  # north pole has z = 1
        mask[-1] = True  # south pole belongs to the closed octant
    else:  # lune
        beta = grid.domain.beta
        inside = (ph > _ANGLE_TOL) & (ph < beta - _ANGLE_TOL)
        mask = ~inside
        mask[0] = True
        mask[-1] = True
    return mask


def quadrature_weights(grid: GridSpec) -> np.ndarray:
    """Node weights making the stencil self-adjoint: sin(theta) h_th h_ph
    on rings; the pole weight is fixed by requiring exact symmetry of the
    pole/ring coupling, which gives (pi/2) sin(h_th/2) h_th."""
    th, _ = node_angles(grid)
    w = np.sin(th) * grid.h_theta * grid.h_phi
    w_pole = 0.5 * math.pi * math.sin(0.5 * grid.h_theta) * grid.h_theta
    w[0] = w_pole
    w[-1] = w_pole
    return w


def _assemble_full(grid: GridSpec) -> sparse.csr_matrix:
    """Negative Laplace-Beltrami stencil on the whole grid (no Dirichlet)."""
    n_phi = grid.n_phi
    h_th, h_ph = grid.h_theta, grid.h_phi
    n = grid.n_nodes
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    def ring_index(i: int, j: int) -> int:
        return 1 + (i - 1) * n_phi + (j % n_phi)

    # pole rows: -lap(u) ~ (4/h^2)(u_pole - ring mean)
    pole_coeff = 4.0 / (h_th * h_th)
    add(0, 0, pole_coeff)
    add(n - 1, n - 1, pole_coeff)
    for j in range(n_phi):
        add(0, ring_index(1, j), -pole_coeff / n_phi)
        add(n - 1, ring_index(grid.n_theta - 1, j), -pole_coeff / n_phi)

    for i in range(1, grid.n_theta):
        th_i = i * h_th
        sin_i = math.sin(th_i)
        sin_up = math.sin(th_i + 0.5 * h_th)    # toward south
        sin_dn = math.sin(th_i - 0.5 * h_th)    # toward north
        c_up = sin_up / (h_th * h_th * sin_i)
        c_dn = sin_dn / (h_th * h_th * sin_i)
        c_ph = 1.0 / (h_ph * h_ph * sin_i * sin_i)
        diag = c_up + c_dn + 2.0 * c_ph
        for j in range(n_phi):
            r = ring_index(i, j)
            add(r, r, diag)
            add(r, ring_index(i, j + 1), -c_ph)
            add(r, ring_index(i, j - 1), -c_ph)
            if i + 1 <= grid.n_theta - 1:
                add(r, ring_index(i + 1, j), -c_up)
            else:
                add(r, n - 1, -c_up)
            if i - 1 >= 1:
                add(r, ring_index(i - 1, j), -c_dn)
            else:
                add(r, 0, -c_dn)
    return sparse.csr_matrix(
        (vals, (rows, cols)), shape=(n, n)
    )


@dataclass(frozen=True)
class AssembledOperator:
    grid: GridSpec
    matrix: sparse.csr_matrix        # full grid; Dirichlet rows/cols decoupled to identity
    symmetric: sparse.csr_matrix     # weighted-symmetrized interior submatrix
    weights: np.ndarray
    mask: np.ndarray                 # True on Dirichlet nodes
    interior: np.ndarray = field(repr=False, default=None)  # interior node indices


def assemble_operator(grid: GridSpec) -> AssembledOperator:
    """Discretized negative Laplace-Beltrami with the grid's Dirichlet set.

    ``matrix`` keeps one row per grid node (identity on Dirichlet nodes,
    couplings to them dropped); the eigensolver uses ``symmetric``, the
    W^{1/2} A W^{-1/2} conjugation restricted to interior nodes, which is
    symmetric to round-off and positive definite.
    """
    full = _assemble_full(grid)
    mask = dirichlet_mask(grid)
    w = quadrature_weights(grid)
    interior = np.flatnonzero(~mask)
    if interior.size == 0:
        raise ValueError("domain has no interior nodes on this grid")
    keep = sparse.diags(np.where(mask, 0.0, 1.0))
    decoupled = keep @ full @ keep + sparse.diags(mask.astype(float))
    sub = full[interior][:, interior]
    sqw = np.sqrt(w[interior])
    sym = sparse.diags(sqw) @ sub @ sparse.diags(1.0 / sqw)
    sym = 0.5 * (sym + sym.T)  # kill round-off asymmetry (~1e-16 relative)
    return AssembledOperator(
        grid=grid,
        matrix=decoupled.tocsr(),
        symmetric=sym.tocsr(),
        weights=w,
        mask=mask,
        interior=interior,
    )


@dataclass(frozen=True)
class SpectralResult:
    lam: float
    iterations: int
    residual: float
    grid: GridSpec
    extrapolated: bool = False
    vector: np.ndarray = field(repr=False, default=None)  # full grid, zeros on Dirichlet


def smallest_eigenvalue(
    op: AssembledOperator, tol: float = 1e-9, max_iter: int = 500
) -> SpectralResult:
    """Smallest Dirichlet eigenvalue by inverse power iteration at shift 0.

    One sparse LU factorization; iterate until the weighted relative
    residual ||A u - lam u|| <= tol * lam.  The returned vector is sign-fixed
    positive (Perron eigenvector of the inverse) and embedded on the full
    grid with zeros on the Dirichlet set.
    """
    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    s = op.symmetric.tocsc()
    lu = splu(s)
    v = np.ones(s.shape[0])
    v /= np.linalg.norm(v)
    lam = float("nan")
    residual = float("inf")
    for it in range(1, max_iter + 1):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
        sv = s @ v
        lam = float(v @ sv)
        residual = float(np.linalg.norm(sv - lam * v))
        if residual <= tol * lam:
            break
    else:
        raise ConvergenceError(max_iter, residual / lam if lam else residual)
    if v.sum() < 0.0:
        v = -v
    full = np.zeros(op.grid.n_nodes)
    # undo the symmetrizing conjugation to recover the nodal eigenfunction
    full[op.interior] = v / np.sqrt(op.weights[op.interior])
    full /= np.abs(full).max()
    return SpectralResult(
        lam=lam,
        iterations=it,
        residual=residual,
        grid=op.grid,
        extrapolated=False,
        vector=full,
    )


def solve_domain(
    domain: sphere.DomainSpec, n_theta: int, n_phi: int, tol: float = 1e-9
) -> SpectralResult:
    return smallest_eigenvalue(
        assemble_operator(GridSpec(n_theta=n_theta, n_phi=n_phi, domain=domain)), tol
    )


@dataclass(frozen=True)
class Extrapolation:
    value: float
    q: float
    reliable: bool
    lambdas: tuple[float, ...]


def richardson_extrapolate(results) -> Extrapolation:
    """Eliminate the leading h^q error from >= 3 eigenvalues at grid
    ratios 2, with q estimated from the three finest levels.

    A non-monotone tail makes the q estimate meaningless; the result is
    then returned with ``reliable=False`` and the finest raw value.
    """
    lams = [r.lam if isinstance(r, SpectralResult) else float(r) for r in results]
    if len(lams) < 3:
        raise ValueError("need at least 3 grid levels")
    for a, b in zip(results, results[1:]):
        if isinstance(a, SpectralResult) and isinstance(b, SpectralResult):
            if b.grid.n_theta != 2 * a.grid.n_theta or b.grid.n_phi != 2 * a.grid.n_phi:
                raise ValueError("grids must refine by ratio 2")
    l1, l2, l3 = lams[-3], lams[-2], lams[-1]
    d12, d23 = l1 - l2, l2 - l3
    if d12 * d23 <= 0.0:
        return Extrapolation(value=l3, q=float("nan"), reliable=False, lambdas=tuple(lams))
    q = math.log2(d12 / d23)
    value = l3 - d23 / (2.0**q - 1.0)
    return Extrapolation(value=value, q=q, reliable=True, lambdas=tuple(lams))
