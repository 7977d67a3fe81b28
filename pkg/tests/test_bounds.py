import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from orthantlab import bounds
from orthantlab.bounds import CutoffProfile


def test_theta_plateau_and_midpoint():
    prof = CutoffProfile(0.2)
    assert bounds.theta(0.0, prof) == 0.0
    assert bounds.theta(0.5, prof) == 0.0
    assert bounds.theta(-0.2, prof) == 1.0
    assert bounds.theta(-0.7, prof) == 1.0
    assert bounds.theta(-0.1, prof) == pytest.approx(0.5, rel=1e-14)


def test_theta_slope_cap_on_dense_grid():
    prof = CutoffProfile(0.07)
    t = np.linspace(-0.2, 0.1, 300_001)
    slopes = np.abs(bounds.theta_prime(t, prof))
    assert slopes.max() <= 2.0 / prof.a
    assert slopes.max() == pytest.approx(1.5 / prof.a, rel=1e-6)


def test_theta_matches_derivative_numerically():
    prof = CutoffProfile(0.3)
    t = np.linspace(-0.29, -0.01, 57)
    eps = 1e-7
    fd = (bounds.theta(t + eps, prof) - bounds.theta(t - eps, prof)) / (2 * eps)
    np.testing.assert_allclose(fd, bounds.theta_prime(t, prof), rtol=1e-6, atol=1e-8)


def test_eta_examples():
    prof = CutoffProfile(0.1)
    x = np.array([0.3, 0.5, 0.81])
    x /= np.linalg.norm(x)
    assert bounds.eta(x, prof) == 0.0
    y = np.array([-0.2, 0.5, 0.84])
    y /= np.linalg.norm(y)
    assert bounds.eta(y, prof) == 1.0
    # min coordinate exactly -a/2 on the circle
    z = np.array([-0.05, math.sqrt(1 - 0.05**2)])
    assert bounds.eta(z, prof) == pytest.approx(0.5, rel=1e-14)


def test_grad_examples():
    prof = CutoffProfile(0.1)
    x = np.array([0.3, 0.5, 0.81])
    x /= np.linalg.norm(x)
    assert bounds.grad_norm_sq_eta(x, prof) == 0.0
    xj = -0.05
    z = np.array([xj, math.sqrt(1 - xj**2)])
    want = (1.5 / prof.a) ** 2 * (1 - xj**2)
    assert bounds.grad_norm_sq_eta(z, prof) == pytest.approx(want, rel=1e-12)
    assert want <= (2.0 / prof.a) ** 2


def test_grad_cap_on_random_points():
    prof = CutoffProfile(0.15)
    rng = np.random.default_rng(8)
    g = rng.standard_normal((20_000, 5))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    vals = bounds.grad_norm_sq_eta(g, prof)
    assert vals.max() <= (2.0 / prof.a) ** 2


def test_grad_matches_finite_difference_on_sphere():
    prof = CutoffProfile(0.2)
    rng = np.random.default_rng(17)
    d = 4
    checked = 0
    while checked < 5:
        x = rng.standard_normal(d)
        x /= np.linalg.norm(x)
        j = int(np.argmin(x))
        # stay inside the ramp, away from its edges and from argmin ties
        if not (-0.18 < x[j] < -0.02):
            continue
        if np.sort(x)[1] - x[j] < 0.05:
            continue
        grad_dir = np.zeros(d)
        grad_dir[j] = 1.0
        grad_dir -= x[j] * x
        v = grad_dir / np.linalg.norm(grad_dir)
        eps = 1e-6

        def eta_at(p):
            return bounds.eta(p / np.linalg.norm(p), prof)

        deriv = (eta_at(x + eps * v) - eta_at(x - eps * v)) / (2 * eps)
        assert deriv**2 == pytest.approx(
            bounds.grad_norm_sq_eta(x, prof), rel=1e-4
        )
        # a tangent direction with no component along e_j sees no change;
        # project within the subspace orthogonal to e_j so tangency is exact
        w = rng.standard_normal(d)
        w[j] = 0.0
        x_off = x.copy()
        x_off[j] = 0.0
        w -= (w @ x_off) / (x_off @ x_off) * x_off
        w /= np.linalg.norm(w)
        flat = (eta_at(x + eps * w) - eta_at(x - eps * w)) / (2 * eps)
        assert abs(flat) <= 1e-5 * (1.5 / prof.a)
        checked += 1


def _circle_rayleigh(a: float) -> float:
    """Quadrature value of the Rayleigh quotient of eta on S^1."""
    prof = CutoffProfile(a)
    phi = np.linspace(0.0, 2.0 * np.pi, 800_001)
    m = np.minimum(np.cos(phi), np.sin(phi))
    dm = np.where(np.cos(phi) <= np.sin(phi), -np.sin(phi), np.cos(phi))
    num = np.trapezoid((bounds.theta_prime(m, prof) * dm) ** 2, phi)
    den = np.trapezoid(bounds.theta(m, prof) ** 2, phi)
    return num / den


def test_rayleigh_d2_matches_quadrature():
    # frozen quadrature values guard the oracle itself
    for a, frozen in ((0.05, 10.3200), (0.3, 1.8226), (0.5, 1.1361)):
        quad = _circle_rayleigh(a)
        assert quad == pytest.approx(frozen, rel=2e-3)
        est, se = bounds.rayleigh_upper_bound(2, CutoffProfile(a), 400_000, 91)
        assert abs(est - quad) <= 4.0 * se


def test_rayleigh_d2_dominates_true_eigenvalue():
    est, se = bounds.rayleigh_upper_bound(2, CutoffProfile(0.05), 10_000_000, 92)
    assert est >= 4.0 / 9.0 - 4.0 * se


def test_rayleigh_rejects_small_budget_and_dim():
    with pytest.raises(ValueError):
        bounds.rayleigh_upper_bound(1, CutoffProfile(0.1), 100_000, 0)
    with pytest.raises(ValueError):
        bounds.rayleigh_upper_bound(3, CutoffProfile(0.1), 100, 0)


def test_sign_averaged_agrees_with_plain():
    for d in (2, 5, 8):
        prof = CutoffProfile(0.3)
        mn_s, se_ns, md_s, se_ds = bounds.rayleigh_moments(
            d, prof, 200_000, 61, sign_averaged=True
        )
        mn_p, se_np, md_p, se_dp = bounds.rayleigh_moments(
            d, prof, 200_000, 62, sign_averaged=False
        )
        assert abs(mn_s - mn_p) <= 4.0 * math.hypot(se_ns, se_np)
        assert abs(md_s - md_p) <= 4.0 * math.hypot(se_ds, se_dp)


def test_sign_averaging_cuts_variance_at_high_d():
    prof = CutoffProfile.scaled(8)
    _, se_s, _, _ = bounds.rayleigh_moments(8, prof, 100_000, 63, sign_averaged=True)
    _, se_p, _, _ = bounds.rayleigh_moments(8, prof, 100_000, 64, sign_averaged=False)
    assert se_s < se_p


def test_denominator_significance_guard():
    noisy = bounds._MomentSums(n=100, sn=1.0, sd=0.1, snn=1.0, sdd=5.0, snd=0.0)
    with pytest.raises(bounds.InsufficientSamples):
        bounds._ratio_with_stderr([noisy])


def test_optimize_singleton_grid():
    res = bounds.optimize_cutoff(3, [0.2], 20_000, 71)
    assert res.a_star == 0.2
    est, _ = bounds.rayleigh_upper_bound(3, CutoffProfile(0.2), 20_000, 71)
    assert res.bound == est


def test_optimize_is_a_minimum_over_the_grid():
    grid = np.geomspace(1e-3, 0.3, 8)
    res = bounds.optimize_cutoff(6, grid, 50_000, 72)
    per_point = [
        bounds.rayleigh_upper_bound(6, CutoffProfile(float(a)), 50_000, 72)
        for a in grid
    ]
    worst = max(b for b, _ in per_point)
    assert res.bound <= worst
    keys = [b + s for b, s in per_point]
    assert res.bound + res.stderr == pytest.approx(min(keys), rel=1e-12)


def test_optimize_validation():
    with pytest.raises(ValueError):
        bounds.optimize_cutoff(3, [], 20_000, 0)
    with pytest.raises(ValueError):
        bounds.optimize_cutoff(3, [0.2, 1.5], 20_000, 0)


@pytest.mark.xfail(
    strict=True,
    reason="ramp-of-the-minimum test functions cannot approach the d=2 ground "
    "state: exact quadrature puts the family's best Rayleigh value near 0.70, "
    "58% above 4/9, for every width in (0,1)",
)
def test_optimize_d2_within_15pct_of_true():
    grid = np.geomspace(0.01, 0.5, 12)
    res = bounds.optimize_cutoff(2, grid, 200_000, 73)
    assert res.bound <= (4.0 / 9.0) * 1.15


def test_conversion_known_values():
    assert bounds.p_from_lambda(4.0 / 9.0, 2) == pytest.approx(2.0 / 3.0, rel=1e-14)
    assert bounds.lambda_from_p(0.4542, 3) == pytest.approx(0.66050, abs=5e-6)
    for d in range(2, 30):
        assert bounds.p_from_lambda(0.0, d) == 0.0
    # d=1: p(p-1) = 0 has roots 0 and 1; the survival branch is the larger
    # root, matching the known exponent p_1 = 1
    assert bounds.p_from_lambda(0.0, 1) == 1.0


def test_conversion_rejects_negatives():
    with pytest.raises(ValueError):
        bounds.p_from_lambda(-0.1, 3)
    with pytest.raises(ValueError):
        bounds.lambda_from_p(-0.1, 3)
    with pytest.raises(ValueError):
        bounds.p_from_lambda(1.0, 0)


@given(
    lam=st.floats(min_value=1e-9, max_value=1e3),
    d=st.integers(min_value=2, max_value=100),
)
@settings(max_examples=200, deadline=None)
def test_roundtrip_lambda_space(lam, d):
    back = bounds.lambda_from_p(bounds.p_from_lambda(lam, d), d)
    assert abs(back - lam) <= 1e-12 * lam


@given(
    p=st.floats(min_value=1e-9, max_value=1e3),
    d=st.integers(min_value=1, max_value=100),
)
@settings(max_examples=200, deadline=None)
def test_roundtrip_p_space(p, d):
    if d == 1:
        p += 1.0  # positive-eigenvalue branch starts at p = 1
    back = bounds.p_from_lambda(bounds.lambda_from_p(p, d), d)
    assert abs(back - p) <= 1e-12 * p


@pytest.mark.xfail(
    strict=True,
    reason="at d=1 the exponent is 1 + O(lambda); a float64 p cannot carry "
    "the offset to 1e-12 relative when lambda ~ 1e-9, so the stated "
    "round-trip tolerance is unreachable there",
)
@given(lam=st.floats(min_value=1e-9, max_value=1e3))
@example(lam=1e-9)
@settings(max_examples=50, deadline=None)
def test_roundtrip_lambda_space_includes_d1(lam):
    back = bounds.lambda_from_p(bounds.p_from_lambda(lam, 1), 1)
    assert abs(back - lam) <= 1e-12 * lam


def test_yamabe_dim4_value():
    val = bounds.yamabe_lower_bound(4)
    x3 = (7.0 / 8.0) ** (2.0 / 3.0)
    assert val == pytest.approx(3.0 * (1.0 - x3) / (4.0 * x3), rel=1e-12)
    assert val == pytest.approx(0.0698, abs=5e-4)


def test_yamabe_rejects_low_dim():
    for dim in (1, 2, 3):
        with pytest.raises(bounds.NotApplicable):
            bounds.yamabe_lower_bound(dim)


def test_yamabe_ratio_window():
    for dim in range(10, 61):
        ratio = bounds.yamabe_lower_bound(dim) * 2.0**dim / dim
        assert 0.1 <= ratio <= 10.0


def test_yamabe_large_dim_no_overflow():
    # 1 - x ~ (2/d) 2^-d, so the bound ~ (d-2) 2^-d / 2 and the sandwich
    # normalization val * 2^dim / dim approaches (dim-3)/dim
    val = bounds.yamabe_lower_bound(400)
    assert val > 0.0
    assert val * 2.0**400 / 400 == pytest.approx(397.0 / 400.0, rel=1e-3)


def test_yamabe_symmetry_variant_is_smaller():
    for dim in (4, 6, 10, 20):
        printed, symmetric = bounds.yamabe_comparison(dim)
        assert 0.0 < symmetric < printed


def test_equivalence_ratio_first_order():
    assert bounds.equivalence_ratio(1e-6, 100) == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(ValueError):
        bounds.equivalence_ratio(0.0, 10)


def test_corollary_rows():
    rows = bounds.corollary_check(range(4, 31))
    by_d = {r.d: r for r in rows}
    assert abs(by_d[20].ratio_lower - 1.0) <= 1e-3
    assert not by_d[20].flagged
    # feeding a non-small eigenvalue flags the row and moves the ratio
    rows = bounds.corollary_check([10], upper_values={10: 10.0})
    assert rows[0].flagged
    assert abs(rows[0].ratio_upper - 1.0) > 0.05
    with pytest.raises(ValueError):
        bounds.corollary_check([3])


def test_sandwich_bounds_record():
    rec = bounds.EigenvalueBounds(
        dim=4,
        lower=0.0698,
        upper=1.68,
        upper_stderr=0.01,
        a_star=0.5,
        point_estimates=((0.65, "mc-exponent"),),
    )
    assert rec.lower_ratio == pytest.approx(0.0698 * 16.0 / 4.0, rel=1e-12)
    assert rec.upper_ratio == pytest.approx(1.68 * 16.0 / 64.0, rel=1e-12)
    with pytest.raises(ValueError):
        bounds.EigenvalueBounds(dim=4, lower=2.0, upper=1.0, upper_stderr=0.01, a_star=0.5)
    with pytest.raises(ValueError):
        bounds.EigenvalueBounds(
            dim=4, lower=0.1, upper=1.0, upper_stderr=0.01, a_star=0.5,
            point_estimates=((0.6, "folklore"),),
        )


def test_sandwich_holds_dims_4_to_12():
    for d in range(4, 13):
        lo = bounds.yamabe_lower_bound(d)
        res = bounds.optimize_cutoff(d, bounds.default_a_grid(d), 50_000, 80 + d)
        assert lo <= res.bound + 4.0 * res.stderr, d


def test_upper_ratio_bounded_at_dimension_scaling():
    ratios = []
    for d in range(4, 13):
        est, _ = bounds.rayleigh_upper_bound(
            d, CutoffProfile.scaled(d), 100_000, 95 + d
        )
        ratios.append(est * 2.0**d / d**3)
    assert all(math.isfinite(r) and r > 0.0 for r in ratios)
    assert max(ratios) / min(ratios) < 50.0


def test_default_grid_contains_scaling_point():
    for d in (2, 5, 12):
        grid = bounds.default_a_grid(d)
        assert np.any(np.isclose(grid, d**-1.5, rtol=1e-12))
        assert grid.min() > 0.0 and grid.max() <= 0.5


def test_cited_eigenvalues_consistent_with_conversions():
    assert bounds.CITED_EIGENVALUES[1] == 0.0
    assert bounds.p_from_lambda(bounds.CITED_EIGENVALUES[2], 2) == pytest.approx(
        2.0 / 3.0, rel=1e-12
    )
    assert bounds.p_from_lambda(bounds.CITED_EIGENVALUES[3], 3) == pytest.approx(
        0.4542, rel=1e-12
    )
