"""Path-level Monte Carlo for the orthant exit problem.

Simulates d independent linear Brownian motions (or +-1 random walks) until
the first grid time at which every coordinate is negative, builds censored
survival curves on a geometric time grid, fits the power-law tail exponent,
and samples the occupation time of the positive orthant.

Exit detection is fixed-step monitoring: excursions into the negative
orthant between grid times are missed, which biases survival upward; the
bias shrinks with the step and is quantified by step-refinement rather than
bridged (the event "all d coordinates simultaneously negative" has no
per-coordinate bridge decomposition).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .streams import DEFAULT_CHUNKS, chunk_generators, chunk_sizes, run_chunks

# steps drawn per vectorized block; memory per chunk stays ~ block * dim
_BLOCK_STEPS = 256

CENSORED = np.inf

MODELS = ("brownian", "lattice")


class DegenerateCurve(RuntimeError):
    """Every path exited before the first grid time."""


class FitWindowError(RuntimeError):
    """The requested window cannot support a tail fit."""


class UnsupportedRender(ValueError):
    """Trajectory tables are only emitted for d <= 3."""


def default_start(dim: int) -> np.ndarray:
    """Symmetric interior start (1,...,1)/sqrt(d), unit distance from 0."""
    return np.full(dim, 1.0 / math.sqrt(dim))


@dataclass(frozen=True)
class WalkConfig:
    dim: int
    model: str = "brownian"
    step: float = 1e-2
    start: np.ndarray | None = None
    t_max: float = 1e3
    n_paths: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.t_max <= 0.0:
            raise ValueError("t_max must be > 0")
        if self.model == "brownian":
            if not 0.0 < self.step <= self.t_max:
                raise ValueError("need 0 < step <= t_max")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        start = default_start(self.dim) if self.start is None else np.asarray(
            self.start, dtype=float
        )
        if start.shape != (self.dim,):
            raise ValueError(f"start must have shape ({self.dim},)")
        if not np.any(start > 0.0):
            raise ValueError("start needs at least one positive coordinate")
        object.__setattr__(self, "start", start)

    @property
    def dt(self) -> float:
        """Time advanced per simulation step."""
        return self.step if self.model == "brownian" else 1.0

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_max / self.dt + 1e-9))


def _exit_steps_block(
    cfg: WalkConfig, rng: np.random.Generator, n: int
) -> np.ndarray:
    """First step index (1-based) at which all coordinates are < 0, for
    ``n`` paths; 0 marks paths still alive at the horizon."""
    d = cfg.dim
    n_steps = cfg.n_steps
    pos = np.tile(cfg.start, (n, 1))
    exit_step = np.zeros(n, dtype=np.int64)
    alive = np.arange(n)
    done_steps = 0
    scale = math.sqrt(cfg.dt) if cfg.model == "brownian" else 1.0
    while done_steps < n_steps and alive.size:
        k = min(_BLOCK_STEPS, n_steps - done_steps)
        if cfg.model == "brownian":
            inc = rng.standard_normal((alive.size, k, d))
            inc *= scale
            np.cumsum(inc, axis=1, out=inc)
        else:
            inc = 2 * rng.integers(0, 2, size=(alive.size, k, d)).astype(np.int64) - 1
            inc = np.cumsum(inc, axis=1)
        path = pos[:, None, :] + inc
        dead_any_step = (path < 0.0).all(axis=2)
        hit = dead_any_step.any(axis=1)
        first = dead_any_step.argmax(axis=1)
        exit_step[alive[hit]] = done_steps + first[hit] + 1
        keep = ~hit
        alive = alive[keep]
        pos = path[keep, -1, :]
        done_steps += k
    return exit_step


def exit_times_from_steps(cfg: WalkConfig, steps: np.ndarray) -> np.ndarray:
    t = steps.astype(float) * cfg.dt
    t[steps == 0] = CENSORED
    return t


def sample_exit_times(
    cfg: WalkConfig, threads: int = 1, n_chunks: int = DEFAULT_CHUNKS
) -> np.ndarray:
    """Exit times for cfg.n_paths paths; CENSORED (= inf) past the horizon.

    The path budget is split into fixed chunks with independent substreams,
    so the output depends on (seed, n_chunks) only, never on ``threads``.
    """
    chunks = chunk_generators(cfg.seed, cfg.n_paths, n_chunks)

    def one_chunk(i: int) -> np.ndarray:
        size, gen = chunks[i]
        if size == 0:
            return np.empty(0, dtype=np.int64)
        return _exit_steps_block(cfg, gen, size)

    parts = run_chunks(one_chunk, n_chunks, threads)
    return exit_times_from_steps(cfg, np.concatenate(parts))


def sample_exit_time(cfg: WalkConfig, rng) -> float:
    """One exit time draw using the supplied generator (or seed)."""
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    step = _exit_steps_block(cfg, gen, 1)[0]
    return float(step * cfg.dt) if step > 0 else CENSORED


def survival_grid(cfg: WalkConfig, points_per_decade: int = 32) -> np.ndarray:
    """Geometric time grid in (0, t_max], 32 points per decade by default,
    starting at max(step, t_max/1000)."""
    t_lo = max(cfg.dt, cfg.t_max * 1e-3)
    if t_lo >= cfg.t_max:
        return np.array([cfg.t_max])
    decades = math.log10(cfg.t_max / t_lo)
    n_pts = max(2, int(math.ceil(points_per_decade * decades)) + 1)
    return np.geomspace(t_lo, cfg.t_max, n_pts)


@dataclass(frozen=True)
class SurvivalCurve:
    cfg: WalkConfig
    times: np.ndarray
    survival: np.ndarray
    stderr: np.ndarray
    n_paths: int
    censored_fraction: float
    # per-chunk alive counts (n_chunks, n_times) kept for jackknife reuse
    alive_chunks: np.ndarray = field(repr=False, default=None)

    @property
    def alive(self) -> np.ndarray:
        return self.alive_chunks.sum(axis=0)


def survival_curve(
    cfg: WalkConfig,
    threads: int = 1,
    n_chunks: int = DEFAULT_CHUNKS,
    points_per_decade: int = 32,
) -> SurvivalCurve:
    """Censoring-aware empirical survival on a geometric grid.

    Paths alive at the horizon count as survivors at every grid point.
    Raises :class:`DegenerateCurve` when no path reaches the first grid
    time.
    """
    if cfg.n_paths < 1_000:
        raise ValueError("need at least 1e3 paths for a curve")
    times = survival_grid(cfg, points_per_decade)
    chunks = chunk_generators(cfg.seed, cfg.n_paths, n_chunks)

    def one_chunk(i: int) -> np.ndarray:
        size, gen = chunks[i]
        if size == 0:
            return np.zeros((1 + times.size,), dtype=np.int64)
        steps = _exit_steps_block(cfg, gen, size)
        t = exit_times_from_steps(cfg, steps)
        t.sort()
        alive = size - np.searchsorted(t, times, side="right")
        n_censored = int(np.count_nonzero(np.isinf(t)))
        return np.concatenate(([n_censored], alive)).astype(np.int64)

    parts = run_chunks(one_chunk, n_chunks, threads)
    stacked = np.stack(parts)
    censored = int(stacked[:, 0].sum())
    alive_chunks = stacked[:, 1:]
    alive = alive_chunks.sum(axis=0)
    if alive[0] == 0:
        raise DegenerateCurve("no path survived to the first grid time")
    n = cfg.n_paths
    surv = alive / n
    # stderr from the add-half adjusted proportion so it never collapses to
    # zero at empirical 0 or 1 (plain binomial plug-in is degenerate there)
    adj = (alive + 0.5) / (n + 1.0)
    stderr = np.sqrt(adj * (1.0 - adj) / n)
    return SurvivalCurve(
        cfg=cfg,
        times=times,
        survival=surv,
        stderr=stderr,
        n_paths=cfg.n_paths,
        censored_fraction=censored / cfg.n_paths,
        alive_chunks=alive_chunks,
    )


@dataclass(frozen=True)
class ExponentFit:
    dim: int
    slope: float
    stderr: float  # jackknife-over-chunks stderr of the slope
    window: tuple[float, float]
    r_squared: float
    n_points: int

    def __post_init__(self):
        if self.p_hat < -2.0 * self.p_stderr:
            raise ValueError("fitted exponent significantly negative")

    @property
    def p_hat(self) -> float:
        return -2.0 * self.slope

    @property
    def p_stderr(self) -> float:
        return 2.0 * self.stderr

    @property
    def lambda_hat(self) -> float:
        return self.p_hat * (self.p_hat + self.dim - 2)


def _wls_slope(log_t: np.ndarray, log_s: np.ndarray, w: np.ndarray):
    sw = w.sum()
    mx = (w * log_t).sum() / sw
    my = (w * log_s).sum() / sw
    dx = log_t - mx
    dy = log_s - my
    sxx = (w * dx * dx).sum()
    slope = (w * dx * dy).sum() / sxx
    resid = dy - slope * dx
    ss_res = (w * resid * resid).sum()
    ss_tot = (w * dy * dy).sum()
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, r2


def fit_tail_exponent(
    curve: SurvivalCurve, window: tuple[float, float] | None = None
) -> ExponentFit:
    """Weighted log-log fit of the survival tail over ``window``.

    The point estimate uses delta-method weights 1/Var(log S); the slope
    stderr is a leave-one-chunk-out jackknife, because the grid points
    share paths and the naive WLS variance is optimistic.  Default window
    is the top decade (t_max/10, t_max].
    """
    if window is None:
        window = (curve.cfg.t_max / 10.0, curve.cfg.t_max)
    t_lo, t_hi = window
    sel = (curve.times >= t_lo) & (curve.times <= t_hi)
    if sel.sum() < 8:
        raise FitWindowError(f"window contains {int(sel.sum())} points, need >= 8")
    times = curve.times[sel]
    n = curve.n_paths
    alive = curve.alive_chunks[:, sel].sum(axis=0)
    if np.any(alive == 0):
        raise FitWindowError("survival hits zero inside the window")
    surv = alive / n
    if surv[-1] >= 0.9:
        raise FitWindowError(
            f"survival {surv[-1]:.3f} at window end; not enough decay to fit"
        )
    log_t = np.log(times)

    def slope_of(alive_counts: np.ndarray, total: int):
        s = alive_counts / total
        # Var(log S) = (1-S)/(S*n) by the delta method on binomial counts
        w = total * s / np.maximum(1.0 - s, 1e-12)
        return _wls_slope(log_t, np.log(s), w)

    slope, r2 = slope_of(alive, n)

    m = curve.alive_chunks.shape[0]
    chunk_alive = curve.alive_chunks[:, sel]
    sizes = chunk_sizes(n, m)
    reps = []
    for j in range(m):
        a_j = alive - chunk_alive[j]
        n_j = n - sizes[j]
        if np.any(a_j == 0):
            continue
        reps.append(slope_of(a_j, n_j)[0])
    reps = np.asarray(reps)
    if reps.size >= 2:
        stderr = math.sqrt((reps.size - 1) / reps.size * ((reps - reps.mean()) ** 2).sum())
    else:
        stderr = float("nan")
    return ExponentFit(
        dim=curve.cfg.dim,
        slope=float(slope),
        stderr=float(stderr),
        window=(float(t_lo), float(t_hi)),
        r_squared=float(r2),
        n_points=int(sel.sum()),
    )


def occupation_time_batch(
    dim: int, h: float, rng: np.random.Generator, n: int
) -> np.ndarray:
    """Occupation times of the closed positive orthant over [0, 1] for
    ``n`` Brownian paths started at the origin.

    Trapezoidal Riemann sum of the orthant indicator on the step grid; the
    endpoint average removes the half-cell bias a one-sided sum leaves at
    the T = 0 atom (the origin itself always sits in the closed orthant).
    """
    if h > 1e-2 + 1e-15:
        raise ValueError("need h <= 1e-2 to resolve the occupation law")
    n_steps = int(round(1.0 / h))
    count = np.zeros(n, dtype=np.int64)
    pos = np.zeros((n, dim))
    scale = math.sqrt(h)
    done = 0
    last_inside = None
    while done < n_steps:
        k = min(_BLOCK_STEPS, n_steps - done)
        inc = rng.standard_normal((n, k, dim))
        inc *= scale
        np.cumsum(inc, axis=1, out=inc)
        path = pos[:, None, :] + inc
        inside = (path >= 0.0).all(axis=2)
        count += inside.sum(axis=1)
        last_inside = inside[:, -1]
        pos = path[:, -1, :]
        done += k
    t = (count + 0.5 * (1.0 - last_inside)) * h
    # Continuity correction at the extreme outcomes: the all-out and all-in
    # atoms carry mass ~ (pi*n)^(-1/2) each (a distribution-free count
    # identity for symmetric continuous increments), and the limiting edge
    # law has density ~ 1/(pi*sqrt(t)), so the half-mass quantile of either
    # atom sits (pi/16)*h inside the interval.  Placing the atoms there
    # removes the leading sup-norm error against any continuous limit law.
    edge = (math.pi / 16.0) * h
    t[count == 0] = edge
    t[count == n_steps] = 1.0 - edge
    return t


def occupation_time_sample(dim: int, h: float, rng) -> float:
    """One occupation-time draw (see :func:`occupation_time_batch`)."""
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    return float(occupation_time_batch(dim, h, gen, 1)[0])


def occupation_times(
    dim: int,
    h: float,
    n: int,
    seed,
    threads: int = 1,
    n_chunks: int = DEFAULT_CHUNKS,
) -> np.ndarray:
    """Chunk-deterministic batch of occupation times."""
    chunks = chunk_generators(seed, n, n_chunks)

    def one_chunk(i: int) -> np.ndarray:
        size, gen = chunks[i]
        if size == 0:
            return np.empty(0)
        return occupation_time_batch(dim, h, gen, size)

    return np.concatenate(run_chunks(one_chunk, n_chunks, threads))


def arcsine_cdf(t) -> np.ndarray:
    """CDF of the d=1 occupation time: (2/pi) * arcsin(sqrt(t))."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return (2.0 / math.pi) * np.arcsin(np.sqrt(t))


def survival_oracle_1d(x0: float, t) -> np.ndarray:
    """Exact P(one-sided Brownian exit time > t) from start x0 > 0."""
    t = np.asarray(t, dtype=float)
    return erf(x0 / np.sqrt(2.0 * t))


def render_paths(cfg: WalkConfig, n: int) -> list[np.ndarray]:
    """Full trajectories of up to ``n`` unit-step walks surviving to the
    horizon, for offline plotting.  Uses the lattice dynamics regardless of
    cfg.model (the picture is about walks); each trajectory is an array of
    shape (n_steps + 1, dim) including the start.
    """
    if cfg.dim > 3:
        raise UnsupportedRender("trajectory tables are limited to d <= 3")
    if n > 10:
        raise ValueError("at most 10 trajectories per table")
    if n == 0:
        return []
    lat = WalkConfig(
        dim=cfg.dim,
        model="lattice",
        start=np.ceil(np.asarray(cfg.start)),
        t_max=cfg.t_max,
        n_paths=cfg.n_paths,
        seed=cfg.seed,
    )
    n_steps = lat.n_steps
    rng = np.random.default_rng(np.random.SeedSequence(lat.seed))
    out: list[np.ndarray] = []
    attempts = 0
    while len(out) < n and attempts < 200 * n:
        batch = max(4 * n, 16)
        attempts += batch
        inc = 2 * rng.integers(0, 2, size=(batch, n_steps, lat.dim)).astype(np.int64) - 1
        path = np.concatenate(
            [np.tile(lat.start, (batch, 1, 1)), lat.start + np.cumsum(inc, axis=1)],
            axis=1,
        )
        dead = (path < 0.0).all(axis=2).any(axis=1)
        for idx in np.flatnonzero(~dead):
            if len(out) < n:
                out.append(path[idx])
    return out
