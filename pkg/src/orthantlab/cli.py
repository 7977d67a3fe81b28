"""Command-line front end.

Subcommands: simulate (exit-time survival curves + tail fit), volume
(hit-or-miss fractions + certified recursion bound), bounds (closed-form
lower / Rayleigh upper eigenvalue bounds), spectral (S^2 eigensolver),
report (cross-engine summary table), selfcheck (closed-form oracle suite),
replay (re-run a manifest byte-identically).

Exit codes: 0 success, 2 invalid arguments, 3 numerical failure.

Every output file gets a ``<out>.manifest.json`` sidecar recording the
resolved parameters; ``replay`` re-executes a manifest and reproduces the
outputs byte for byte.  Floats are rendered with repr(), the shortest
round-trip decimal form, so files diff cleanly.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, bounds, fpt, spectral, sphere, volume
from .streams import default_threads

NUMERICAL_ERRORS = (
    fpt.DegenerateCurve,
    fpt.FitWindowError,
    spectral.ConvergenceError,
    bounds.InsufficientSamples,
    volume.SlabParameterOverflow,
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n",
        encoding="utf-8",
    )


def _write_manifest(out: Path, subcommand: str, params: dict) -> None:
    manifest = {
        "subcommand": subcommand,
        "parameters": params,
        "seed": params.get("seed"),
        "threads": params.get("threads"),
        "artifact_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    _write_json(Path(str(out) + ".manifest.json"), manifest)


def parse_dims(text: str) -> list[int]:
    """Parse '1..6', '2,5,9', '1..3,8' into a sorted dimension list."""
    dims: list[int] = []
    text = text.strip()
    if not text:
        return dims
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            dims.extend(range(int(lo), int(hi) + 1))
        else:
            dims.append(int(part))
    return sorted(set(dims))


# ---------------------------------------------------------------- simulate


def _cmd_simulate(args) -> int:
    cfg = fpt.WalkConfig(
        dim=args.dim,
        model=args.model,
        step=args.step,
        t_max=args.tmax,
        n_paths=args.paths,
        seed=args.seed,
    )
    curve = fpt.survival_curve(cfg, threads=args.threads)
    out = Path(args.out)
    rows = [
        [t, s, e, int(a), curve.n_paths]
        for t, s, e, a in zip(curve.times, curve.survival, curve.stderr, curve.alive)
    ]
    _write_csv(out, ["t", "survival", "stderr", "alive", "total"], rows)

    fit = fpt.fit_tail_exponent(curve)
    summary = {
        "dim": cfg.dim,
        "model": cfg.model,
        "step": cfg.dt,
        "window": [fit.window[0], fit.window[1]],
        "slope": fit.slope,
        "slope_stderr": fit.stderr,
        "p_hat": fit.p_hat,
        "p_stderr": fit.p_stderr,
        "lambda_hat": fit.lambda_hat,
        "r2": fit.r_squared,
    }
    # one-decade-earlier window, so the asymptotic-regime sensitivity is
    # visible next to the headline number
    try:
        alt = fpt.fit_tail_exponent(curve, window=(cfg.t_max / 100.0, cfg.t_max / 10.0))
        summary["window_alt"] = {
            "window": [alt.window[0], alt.window[1]],
            "p_hat": alt.p_hat,
            "p_stderr": alt.p_stderr,
        }
    except fpt.FitWindowError:
        pass
    fit_path = out.with_suffix(".fit.json")
    _write_json(fit_path, summary)
    _write_manifest(out, "simulate", _params(args))
    print(f"wrote {out} and {fit_path}: p_hat={fit.p_hat:.4f} +- {fit.p_stderr:.4f}")
    return 0


# ------------------------------------------------------------------ volume


_DOMAIN_BUILDERS = {
    "orthant-complement": lambda d, k, a, beta: sphere.DomainSpec.orthant_complement(d),
    "negative-orthant": lambda d, k, a, beta: sphere.DomainSpec.negative_orthant(d),
    "sigma-slab": lambda d, k, a, beta: sphere.DomainSpec.sigma_slab(d, a),
    "v-slab": lambda d, k, a, beta: sphere.DomainSpec.v_slab(k, d, a),
    "hemisphere": lambda d, k, a, beta: sphere.DomainSpec.hemisphere(d),
    "lune": lambda d, k, a, beta: sphere.DomainSpec.lune(d, beta),
}


def _volume_row(domain_name: str, dim: int, k, a, beta, n, seed, threads) -> list:
    dom = _DOMAIN_BUILDERS[domain_name](dim, k, a, beta)
    est = volume.estimate_fraction(dom, n, seed, threads=threads)
    bound = None
    if domain_name == "sigma-slab":
        bound = volume.recursion_bound(dim, dim, a).bound_fraction
    elif domain_name == "v-slab":
        bound = volume.recursion_bound(k, dim, a).bound_fraction
    return [
        domain_name,
        dim,
        k,
        a,
        n,
        est.fraction,
        est.stderr,
        est.ci95[0],
        est.ci95[1],
        bound,
    ]


def _cmd_volume(args) -> int:
    if args.domain in ("sigma-slab", "v-slab") and args.a is None:
        raise ValueError(f"--a is required for {args.domain}")
    if args.domain == "v-slab" and args.k is None:
        raise ValueError("--k is required for v-slab")
    if args.domain == "lune" and args.beta is None:
        raise ValueError("--beta is required for lune")
    dims = parse_dims(args.dims)
    if not dims:
        raise ValueError("--dims is empty")
    rows = [
        _volume_row(
            args.domain, d, args.k, args.a, args.beta, args.samples, args.seed + i, args.threads
        )
        for i, d in enumerate(dims)
    ]
    out = Path(args.out)
    _write_csv(
        out,
        ["domain", "dim", "k", "a", "n", "fraction", "stderr", "ci_lo", "ci_hi", "bound_fraction"],
        rows,
    )
    _write_manifest(out, "volume", _params(args))
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


# ------------------------------------------------------------------ bounds


def _cmd_bounds(args) -> int:
    dims = parse_dims(args.dims)
    if any(d < 4 for d in dims):
        raise ValueError("closed-form lower bound needs dims >= 4")
    rows = []
    for d in dims:
        lower = bounds.yamabe_lower_bound(d)
        opt = bounds.optimize_cutoff(d, bounds.default_a_grid(d), args.samples, args.seed)
        rec = bounds.EigenvalueBounds(
            dim=d,
            lower=lower,
            upper=opt.bound,
            upper_stderr=opt.stderr,
            a_star=opt.a_star,
        )
        rows.append(
            [d, rec.lower, rec.upper, rec.upper_stderr, rec.a_star, rec.lower_ratio, rec.upper_ratio]
        )
        print(
            f"dim {d}: lower={rec.lower:.6g} upper={rec.upper:.6g}"
            f" (a*={rec.a_star:.4g}, ratios {rec.lower_ratio:.3f}/{rec.upper_ratio:.3f})"
        )
    out = Path(args.out)
    _write_csv(
        out,
        ["dim", "lower", "upper", "upper_stderr", "a_star", "lower_ratio", "upper_ratio"],
        rows,
    )
    _write_manifest(out, "bounds", _params(args))
    return 0


# ---------------------------------------------------------------- spectral


_SPECTRAL_DOMAINS = {
    "u3": lambda beta: sphere.DomainSpec.orthant_complement(3),
    "hemisphere": lambda beta: sphere.DomainSpec.hemisphere(3),
    "lune": lambda beta: sphere.DomainSpec.lune(3, beta),
}


def _cmd_spectral(args) -> int:
    if args.domain == "lune" and args.beta is None:
        raise ValueError("--beta is required for lune")
    dom = _SPECTRAL_DOMAINS[args.domain](args.beta)
    grids = []
    results = []
    for level in range(args.levels):
        nt = args.ntheta * 2**level
        nph = args.nphi * 2**level
        res = spectral.solve_domain(dom, nt, nph, tol=args.tol)
        grids.append([nt, nph])
        results.append(res)
        print(f"{nt}x{nph}: lambda={res.lam!r} ({res.iterations} iterations)")
    if len(results) >= 3:
        ex = spectral.richardson_extrapolate(results)
        extrapolated = ex.value
        q = ex.q if ex.reliable else None
        if not ex.reliable:
            print("warning: non-monotone refinement; extrapolation unreliable")
    else:
        extrapolated = results[-1].lam
        q = None
    payload = {
        "domain": args.domain,
        "grids": grids,
        "lambdas": [r.lam for r in results],
        "extrapolated": extrapolated,
        "q": q,
    }
    out = Path(args.out)
    _write_json(out, payload)
    _write_manifest(out, "spectral", _params(args))
    print(f"wrote {out}: extrapolated lambda = {extrapolated!r}")
    return 0


# ------------------------------------------------------------------ report


def _report_row(d: int, args) -> dict:
    row: dict = {
        "dim": d,
        "p_mc": None,
        "p_mc_stderr": None,
        "lambda_mc": None,
        "lambda_spectral": None,
        "yamabe_lower": None,
        "rayleigh_upper": None,
        "rayleigh_stderr": None,
        "lower_ratio": None,
        "upper_ratio": None,
        "sandwich_ok": None,
        "note": "",
    }
    if d <= 16:
        cfg = fpt.WalkConfig(
            dim=d,
            model="brownian",
            step=args.step,
            t_max=args.tmax,
            n_paths=args.paths,
            seed=args.seed + d,
        )
        curve = fpt.survival_curve(cfg, threads=args.threads)
        try:
            fit = fpt.fit_tail_exponent(curve)
            row["p_mc"] = fit.p_hat
            row["p_mc_stderr"] = fit.p_stderr
            row["lambda_mc"] = fit.lambda_hat
        except fpt.FitWindowError as exc:
            row["note"] = f"tail fit skipped: {exc}"
    if d == 3:
        results = [
            spectral.solve_domain(sphere.DomainSpec.orthant_complement(3), nt, 2 * nt)
            for nt in (64, 128, 256)
        ]
        row["lambda_spectral"] = spectral.richardson_extrapolate(results).value
    if d >= 4:
        row["yamabe_lower"] = bounds.yamabe_lower_bound(d)
        opt = bounds.optimize_cutoff(
            d, bounds.default_a_grid(d), args.samples, args.seed
        )
        row["rayleigh_upper"] = opt.bound
        row["rayleigh_stderr"] = opt.stderr
        row["lower_ratio"] = row["yamabe_lower"] * 2.0**d / d
        row["upper_ratio"] = row["rayleigh_upper"] * 2.0**d / d**3
        if row["p_mc"] is not None:
            p, sp = row["p_mc"], row["p_mc_stderr"]
            lam_se = (2.0 * p + d - 2.0) * sp
            ok_low = row["yamabe_lower"] <= row["lambda_mc"] + 4.0 * lam_se
            ok_high = row["lambda_mc"] <= row["rayleigh_upper"] + 4.0 * math.hypot(
                lam_se, row["rayleigh_stderr"]
            )
            row["sandwich_ok"] = bool(ok_low and ok_high)
        else:
            row["sandwich_ok"] = (
                row["yamabe_lower"] <= row["rayleigh_upper"] + 4.0 * row["rayleigh_stderr"]
            )
    return row


_REPORT_COLUMNS = [
    "dim",
    "p_mc",
    "p_mc_stderr",
    "lambda_mc",
    "lambda_spectral",
    "yamabe_lower",
    "rayleigh_upper",
    "rayleigh_stderr",
    "lower_ratio",
    "upper_ratio",
    "sandwich_ok",
    "note",
]


def _cmd_report(args) -> int:
    dims = parse_dims(args.dims)
    rows = []
    for d in dims:
        try:
            rows.append(_report_row(d, args))
        except NUMERICAL_ERRORS as exc:
            raise type(exc)(f"dim {d}: {exc}") from exc
    out = Path(args.out)
    csv_rows = []
    for r in rows:
        csv_rows.append(
            [
                r[c]
                if c not in ("sandwich_ok", "note")
                else ("" if r[c] is None else (int(r[c]) if c == "sandwich_ok" else r[c]))
                for c in _REPORT_COLUMNS
            ]
        )
    _write_csv(out, _REPORT_COLUMNS, csv_rows)
    _write_json(out.with_suffix(".json"), rows)
    _write_manifest(out, "report", _params(args))
    violations = [r["dim"] for r in rows if r["sandwich_ok"] is False]
    if violations:
        print(f"sandwich violation at dims {violations}", file=sys.stderr)
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


# --------------------------------------------------------------- selfcheck


def _check(name: str, ok: bool, detail: str, failures: list) -> None:
    tag = "PASS" if ok else "FAIL"
    print(f"{tag} {name}: {detail}")
    if not ok:
        failures.append(name)


def _cmd_selfcheck(args) -> int:
    failures: list[str] = []
    seed = args.seed

    prof = bounds.CutoffProfile(0.2)
    grid = np.linspace(-0.5, 0.3, 200_001)
    peak = np.abs(bounds.theta_prime(grid, prof)).max()
    _check(
        "cutoff-slope",
        abs(peak - 1.5 / 0.2) < 1e-6 and peak <= 2.0 / 0.2,
        f"max |theta'| = {peak:.6f}, cap 10",
        failures,
    )

    # round-trip in p-space; the reverse direction is ill-conditioned at
    # d=1 where p = 1 + lambda stores the offset with half the digits
    worst = 0.0
    for d in (1, 2, 3, 10, 100):
        ps = max(0.0, 2.0 - d) + np.geomspace(1e-9, 1e3, 25)
        back = np.array([bounds.p_from_lambda(bounds.lambda_from_p(p, d), d) for p in ps])
        worst = max(worst, np.max(np.abs(back - ps) / ps))
    _check("conversion-roundtrip", worst < 1e-12, f"worst relative error {worst:.2e}", failures)

    cfg = fpt.WalkConfig(
        dim=1, model="brownian", step=1e-2, start=np.array([1.0]), t_max=1.0,
        n_paths=20_000, seed=seed,
    )
    curve = fpt.survival_curve(cfg, threads=args.threads)
    oracle = fpt.survival_oracle_1d(1.0, curve.times)
    allow = 1.5 * 0.5826 * math.sqrt(cfg.dt) * np.sqrt(2.0 / (np.pi * curve.times)) * np.exp(
        -1.0 / (2.0 * curve.times)
    )
    z = float(((np.abs(curve.survival - oracle) - allow) / curve.stderr).max())
    _check("erf-survival", z <= 4.0, f"worst z = {z:.2f} (4.0 allowed)", failures)

    t_occ = fpt.occupation_times(1, 2e-3, 20_000, seed=seed, threads=args.threads)
    t_sorted = np.sort(t_occ)
    probe = np.unique(np.concatenate([np.linspace(0, 1, 2001), t_sorted[:50], t_sorted[-50:]]))
    emp = np.searchsorted(t_sorted, probe, side="right") / t_occ.size
    ks = float(np.abs(emp - fpt.arcsine_cdf(probe)).max())
    _check("arcsine-occupation", ks <= 0.03, f"KS = {ks:.4f} (0.03 allowed)", failures)

    res = spectral.solve_domain(sphere.DomainSpec.hemisphere(3), 64, 128)
    _check(
        "hemisphere-eigenvalue",
        abs(res.lam - 2.0) < 0.02,
        f"lambda = {res.lam:.6f} (exact 2)",
        failures,
    )

    res = spectral.solve_domain(sphere.DomainSpec.lune(3, 1.5 * math.pi), 64, 128)
    _check(
        "lune-eigenvalue",
        abs(res.lam - 10.0 / 9.0) < 10.0 / 9.0 * 0.02,
        f"lambda = {res.lam:.6f} (exact {10/9:.6f})",
        failures,
    )

    a = 0.25
    est = volume.estimate_fraction(
        sphere.DomainSpec.sigma_slab(2, a), 100_000, seed, threads=args.threads
    )
    exact = volume.circle_slab_fraction(2, a)
    zvol = abs(est.fraction - exact) / est.stderr
    _check(
        "circle-slab-volume",
        zvol <= 4.0,
        f"mc {est.fraction:.5f} vs exact {exact:.5f} (z = {zvol:.2f})",
        failures,
    )

    printed, symmetric = bounds.yamabe_comparison(4)
    _check(
        "lower-bound-closed-form",
        abs(printed - 0.0698) < 5e-4 and symmetric > 0.0,
        f"printed fraction: {printed:.6f}; symmetry-corrected fraction: {symmetric:.6f}",
        failures,
    )

    prof2 = bounds.CutoffProfile(0.3)
    ray, se = bounds.rayleigh_upper_bound(2, prof2, 200_000, seed, threads=args.threads)
    phi = np.linspace(0.0, 2.0 * np.pi, 400_001)
    m = np.minimum(np.cos(phi), np.sin(phi))
    dm = np.where(np.cos(phi) <= np.sin(phi), -np.sin(phi), np.cos(phi))
    num = np.trapezoid((bounds.theta_prime(m, prof2) * dm) ** 2, phi)
    den = np.trapezoid(bounds.theta(m, prof2) ** 2, phi)
    zray = abs(ray - num / den) / se
    _check(
        "circle-rayleigh-quadrature",
        zray <= 4.0,
        f"mc {ray:.4f} vs quadrature {num / den:.4f} (z = {zray:.2f})",
        failures,
    )

    if failures:
        print(f"{len(failures)} check(s) failed: {', '.join(failures)}", file=sys.stderr)
        raise fpt.FitWindowError("selfcheck failed")  # numerical-failure exit code
    print("all checks passed")
    return 0


# ------------------------------------------------------------------ replay


def _cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    sub = manifest["subcommand"]
    params = manifest["parameters"]
    if args.out is not None:
        params = dict(params)
        params["out"] = args.out
    argv = [sub]
    for key, value in params.items():
        if value is None:
            continue
        argv.extend([f"--{key.replace('_', '-')}", str(value)])
    return run(argv)


# -------------------------------------------------------------- dispatcher


def _params(args) -> dict:
    skip = {"func", "subcommand"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthant-lab",
        description="numerical laboratory for Brownian orthant-exit exponents "
        "and the first Dirichlet eigenvalue of the orthant-complement cap",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="exit-time survival curve and tail fit")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--model", choices=fpt.MODELS, default="brownian")
    p.add_argument("--step", type=float, default=1e-2)
    p.add_argument("--tmax", type=float, default=1e3)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=default_threads())
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("volume", help="volume fractions and recursion bound")
    p.add_argument("--domain", choices=sorted(_DOMAIN_BUILDERS), required=True)
    p.add_argument("--dims", default="3", help="e.g. 2..8 or 2,4,8")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=default_threads())
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_volume)

    p = sub.add_parser("bounds", help="eigenvalue sandwich per dimension")
    p.add_argument("--dims", default="4..12")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=default_threads())
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("spectral", help="S^2 Dirichlet eigensolver")
    p.add_argument("--domain", choices=sorted(_SPECTRAL_DOMAINS), required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--ntheta", type=int, default=64)
    p.add_argument("--nphi", type=int, default=128)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=default_threads())
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_spectral)

    p = sub.add_parser("report", help="cross-engine summary table")
    p.add_argument("--dims", default="1..6")
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--tmax", type=float, default=200.0)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=default_threads())
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("selfcheck", help="closed-form oracle suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=default_threads())
    p.set_defaults(func=_cmd_selfcheck)

    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_replay)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def main(argv=None) -> int:
    try:
        return run(argv)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
