import json

import numpy as np
import pytest

from orthantlab import cli


def run_cli(args):
    return cli.main([str(a) for a in args])


def read_manifest(out_path):
    return json.loads((out_path.parent / (out_path.name + ".manifest.json")).read_text())


def test_parse_dims():
    assert cli.parse_dims("1..6") == [1, 2, 3, 4, 5, 6]
    assert cli.parse_dims("2,5,9") == [2, 5, 9]
    assert cli.parse_dims("1..3,8,2") == [1, 2, 3, 8]
    assert cli.parse_dims("") == []
    assert cli.parse_dims("  ") == []


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_simulate_dim_zero_exits_2(tmp_path):
    assert run_cli(["simulate", "--dim", 0, "--out", tmp_path / "x.csv"]) == 2


def test_bounds_low_dim_exits_2(tmp_path):
    assert run_cli(["bounds", "--dims", "2..5", "--out", tmp_path / "x.csv"]) == 2


def test_numerical_failure_exits_3(tmp_path):
    # slab parameter overflows mid-recursion
    code = run_cli(
        ["volume", "--domain", "sigma-slab", "--dims", "14", "--a", "0.4",
         "--samples", 1000, "--out", tmp_path / "v.csv"]
    )
    assert code == 3
    # no decay in the fit window
    code = run_cli(
        ["simulate", "--dim", 12, "--step", 0.05, "--tmax", 2, "--paths", 2000,
         "--out", tmp_path / "s.csv"]
    )
    assert code == 3


def test_simulate_artifacts_replay_and_threads(tmp_path):
    out = tmp_path / "surv.csv"
    args = ["simulate", "--dim", 1, "--step", 0.05, "--tmax", 50, "--paths", 4000,
            "--seed", 5, "--out", out]
    assert run_cli(args + ["--threads", 1]) == 0
    text = out.read_text()
    assert text.splitlines()[0] == "t,survival,stderr,alive,total"
    # shortest round-trip floats: every cell is repr(float) or a plain int
    for line in text.splitlines()[1:3]:
        for tok in line.split(","):
            v = float(tok)
            assert tok in (repr(v), str(int(v))), tok
    fit = json.loads(out.with_suffix(".fit.json").read_text())
    assert set(fit) >= {
        "dim", "model", "step", "window", "slope", "slope_stderr",
        "p_hat", "p_stderr", "lambda_hat", "r2",
    }
    assert fit["p_hat"] == pytest.approx(1.0, abs=0.15)

    man = read_manifest(out)
    assert man["subcommand"] == "simulate"
    assert man["seed"] == 5 and "timestamp" in man and "artifact_version" in man

    threaded = tmp_path / "surv_t4.csv"
    assert run_cli(args[:-1] + [threaded, "--threads", 4]) == 0
    assert threaded.read_bytes() == out.read_bytes()

    replayed = tmp_path / "replayed.csv"
    man_path = tmp_path / "surv.csv.manifest.json"
    assert run_cli(["replay", man_path, "--out", replayed]) == 0
    assert replayed.read_bytes() == out.read_bytes()
    assert replayed.with_suffix(".fit.json").read_bytes() == out.with_suffix(
        ".fit.json"
    ).read_bytes()


def test_volume_artifacts_and_replay(tmp_path):
    out = tmp_path / "vol.csv"
    assert run_cli(
        ["volume", "--domain", "v-slab", "--dims", "3,4", "--k", 2, "--a", 0.05,
         "--samples", 50_000, "--seed", 2, "--out", out]
    ) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "domain,dim,k,a,n,fraction,stderr,ci_lo,ci_hi,bound_fraction"
    assert len(lines) == 3
    row = lines[1].split(",")
    assert row[0] == "v-slab" and row[1] == "3"
    assert float(row[9]) >= float(row[5]) - 4.0 * float(row[6])

    replayed = tmp_path / "vol2.csv"
    assert run_cli(["replay", tmp_path / "vol.csv.manifest.json", "--out", replayed]) == 0
    assert replayed.read_bytes() == out.read_bytes()


def test_volume_missing_slab_parameter_exits_2(tmp_path):
    assert run_cli(
        ["volume", "--domain", "sigma-slab", "--dims", "3", "--samples", 1000,
         "--out", tmp_path / "x.csv"]
    ) == 2


def test_bounds_artifacts_and_replay(tmp_path):
    out = tmp_path / "bnd.csv"
    assert run_cli(
        ["bounds", "--dims", "4", "--samples", 20_000, "--seed", 3, "--out", out]
    ) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "dim,lower,upper,upper_stderr,a_star,lower_ratio,upper_ratio"
    row = [float(v) for v in lines[1].split(",")]
    assert row[0] == 4 and row[1] <= row[2] + 4.0 * row[3]

    replayed = tmp_path / "bnd2.csv"
    assert run_cli(["replay", tmp_path / "bnd.csv.manifest.json", "--out", replayed]) == 0
    assert replayed.read_bytes() == out.read_bytes()


def test_spectral_artifacts_and_replay(tmp_path):
    out = tmp_path / "eig.json"
    assert run_cli(
        ["spectral", "--domain", "hemisphere", "--ntheta", 16, "--nphi", 32,
         "--levels", 3, "--out", out]
    ) == 0
    payload = json.loads(out.read_text())
    assert set(payload) == {"domain", "grids", "lambdas", "extrapolated", "q"}
    assert payload["grids"] == [[16, 32], [32, 64], [64, 128]]
    assert payload["extrapolated"] == pytest.approx(2.0, abs=1e-3)

    replayed = tmp_path / "spec2.json"
    assert run_cli(["replay", tmp_path / "eig.json.manifest.json", "--out", replayed]) == 0
    assert replayed.read_bytes() == out.read_bytes()


def test_spectral_lune_needs_beta(tmp_path):
    assert run_cli(
        ["spectral", "--domain", "lune", "--levels", 1, "--out", tmp_path / "x.json"]
    ) == 2


def test_report_row_content(tmp_path):
    out = tmp_path / "rep.csv"
    assert run_cli(
        ["report", "--dims", "3,4", "--paths", 3000, "--tmax", 30, "--step", 0.05,
         "--samples", 20_000, "--seed", 4, "--out", out]
    ) == 0
    rows = json.loads(out.with_suffix(".json").read_text())
    by_dim = {r["dim"]: r for r in rows}
    assert by_dim[3]["lambda_spectral"] == pytest.approx(0.6605, abs=0.03)
    assert by_dim[3]["yamabe_lower"] is None
    assert by_dim[4]["yamabe_lower"] is not None
    assert by_dim[4]["rayleigh_upper"] is not None
    assert by_dim[4]["sandwich_ok"] is True
    header = out.read_text().splitlines()[0]
    assert header.startswith("dim,p_mc,p_mc_stderr,lambda_mc,lambda_spectral")


def test_report_empty_dims_exits_0(tmp_path):
    out = tmp_path / "empty.csv"
    assert run_cli(["report", "--dims", "", "--out", out]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("dim,")


def test_report_replay_identity(tmp_path):
    out = tmp_path / "rep.csv"
    args = ["report", "--dims", "1", "--paths", 2000, "--tmax", 20, "--step", 0.05,
            "--seed", 6, "--out", out]
    assert run_cli(args) == 0
    replayed = tmp_path / "rep2.csv"
    assert run_cli(["replay", tmp_path / "rep.csv.manifest.json", "--out", replayed]) == 0
    assert replayed.read_bytes() == out.read_bytes()
    assert replayed.with_suffix(".json").read_bytes() == out.with_suffix(".json").read_bytes()


def test_outputs_carry_no_timestamp(tmp_path):
    # timestamps live only in the manifest, so replays stay byte-identical
    out = tmp_path / "v.csv"
    assert run_cli(
        ["volume", "--domain", "negative-orthant", "--dims", "2", "--samples", 1000,
         "--out", out]
    ) == 0
    assert "20" + "26" not in out.read_text()
    man = read_manifest(out)
    assert "timestamp" in man
