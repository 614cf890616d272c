import csv
import re
import shutil

import numpy as np
import pytest

from esgdmv.backtest import read_report_csv
from esgdmv.cli import main, read_manifest
from esgdmv.ratings import read_matrix_csv, read_panel_csv

DIAG = re.compile(r'^error code=(\d) kind=(\w+) message=".*"$')

DMV_INI = """
[run]
output = {out}

[market]
mu_f = 0.01
mu_M = 0.07
sigma2_M = 0.04
mu_g = 0.02
sigma2_g = 0.01

[profiles]
types = I, N, U
b = 0.2, 1.0
"""


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_dmv_solve_reference_row(tmp_path):
    cfg = tmp_path / "dmv.ini"
    cfg.write_text(DMV_INI.format(out=tmp_path / "out"))
    assert main(["dmv", "solve", "-c", str(cfg)]) == 0
    rows = _rows(tmp_path / "out" / "dmv.csv")
    assert len(rows) == 6
    u = [r for r in rows if r["type"] == "U" and float(r["b"]) == 1.0][0]
    assert float(u["w"]) == pytest.approx(0.888889, abs=1e-6)
    man = read_manifest(tmp_path / "out" / "manifest.txt")
    assert man["command"] == "dmv solve" and "output.dmv.csv" in man


def test_set_override_wins(tmp_path):
    cfg = tmp_path / "dmv.ini"
    cfg.write_text(DMV_INI.format(out=tmp_path / "out"))
    assert main(["dmv", "solve", "-c", str(cfg), "--set", "profiles.types=I", "--set", "profiles.gamma=4"]) == 0
    rows = _rows(tmp_path / "out" / "dmv.csv")
    assert {r["type"] for r in rows} == {"I"}
    assert float(rows[0]["w"]) == pytest.approx(0.06 / 0.16)


def test_corr_on_fixture(fixtures, tmp_path):
    assert main(["corr", "--panel", str(fixtures / "panel.csv"), "-o", str(tmp_path)]) == 0
    labels, m = read_matrix_csv(tmp_path / "corr.csv")
    assert labels == ["RobecoSAM", "SA", "MSCI", "Asset4"]
    np.testing.assert_array_equal(np.diag(m), 1.0)
    np.testing.assert_allclose(m, m.T)


def test_missing_input_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["corr", "--panel", str(missing), "-o", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err.strip()
    assert DIAG.match(err) and "nope.csv" in err and "kind=config" in err


def test_missing_config_file(tmp_path, capsys):
    assert main(["dmv", "solve", "-c", str(tmp_path / "absent.ini")]) == 1
    assert "absent.ini" in capsys.readouterr().err


def test_data_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("firm,a,b\nx,10,200\ny,20,30\n")
    assert main(["harmonize", "--panel", str(bad), "-o", str(tmp_path / "o")]) == 2
    assert DIAG.match(capsys.readouterr().err.strip())


def test_constant_rater_is_data_error(tmp_path, capsys):
    const = tmp_path / "const.csv"
    const.write_text("firm,a,b\nx,10,10\ny,10,20\nz,10,30\n")
    assert main(["corr", "--panel", str(const), "-o", str(tmp_path / "o")]) == 2
    assert DIAG.match(capsys.readouterr().err.strip())


def test_numerical_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "dmv.ini"
    cfg.write_text(DMV_INI.format(out=tmp_path / "out"))
    # gamma * sigma2_M underflows to zero
    code = main(["dmv", "solve", "-c", str(cfg), "--set", "market.sigma2_M=1e-300",
                 "--set", "profiles.gamma=1e-300", "--set", "profiles.types=I"])
    err = capsys.readouterr().err.strip()
    assert code == 3 and DIAG.match(err) and "kind=numerical" in err


def test_stochastic_commands_need_seed(tmp_path, capsys):
    assert main(["synth", "-o", str(tmp_path)]) == 1
    assert "seed" in capsys.readouterr().err


def test_bad_override_syntax(tmp_path):
    assert main(["dmv", "solve", "--set", "nodot=1"]) == 1


def test_harmonize_and_ensemble_roundtrip(fixtures, tmp_path):
    assert main(["harmonize", "--panel", str(fixtures / "panel_letters.csv"), "-o", str(tmp_path)]) == 0
    p = read_panel_csv(tmp_path / "harmonized.csv")
    src = read_panel_csv(fixtures / "panel_letters.csv")
    np.testing.assert_array_equal(np.nan_to_num(p.scores, nan=-1), np.nan_to_num(src.scores, nan=-1))
    assert main(["ensemble", "--panel", str(fixtures / "panel.csv"), "-o", str(tmp_path / "e"),
                 "--method", "centroid", "--method", "pca", "--method", "alpha_maxmin:0.3"]) == 0
    rows = _rows(tmp_path / "e" / "ensemble.csv")
    assert list(rows[0]) == ["firm", "centroid", "pca", "alpha_maxmin(0.3)"]
    loadings = _rows(tmp_path / "e" / "pca_loadings.csv")
    assert abs(sum(float(r["loading"]) ** 2 for r in loadings) - 1.0) < 1e-12


def test_capm_command(fixtures, tmp_path):
    assert main(["capm", "-c", str(fixtures / "capm.ini"), "-o", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "capm_with_uncertainty.csv")
    x = np.array([float(r["x_m"]) for r in rows])
    beta = np.array([float(r["beta"]) for r in rows])
    alpha = np.array([float(r["alpha"]) for r in rows])
    assert abs(x @ beta - 1.0) < 1e-9 and abs(x @ alpha) < 1e-9
    labels, B = read_matrix_csv(tmp_path / "B_MU.csv")
    assert labels == [r["asset"] for r in rows] and B.shape == (4, 4)


def test_synth_then_backtest_is_byte_identical(tmp_path):
    syn = tmp_path / "syn"
    assert main(["synth", "--seed", "5", "-o", str(syn), "--n-assets", "6", "--n-firms", "6"]) == 0
    portfolio = syn / "portfolio.ini"
    args = ["backtest", "-c", str(portfolio), "--seed", "2", "--optimizer", "cem",
            "--population", "12", "--iterations", "8", "--reward", "dmv_U"]
    assert main([*args, "-o", str(tmp_path / "r1")]) == 0
    assert main([*args, "-o", str(tmp_path / "r2")]) == 0
    for name in ("report.csv", "ranks.csv", "weights.csv", "manifest.txt"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    man = read_manifest(tmp_path / "r1" / "manifest.txt")
    assert man["seed"] == "2" and any(k.startswith("input.") for k in man)
    report = read_report_csv(tmp_path / "r1" / "report.csv")
    assert len(report) == 12 * 8
    ranks = _rows(tmp_path / "r1" / "ranks.csv")
    for row in ranks:
        assert sorted(int(v) for k, v in row.items() if k != "window") == list(range(1, 9))


def test_synth_outputs_roundtrip(tmp_path):
    from esgdmv.market_env import read_price_csv, write_price_csv

    assert main(["synth", "--seed", "1", "-o", str(tmp_path), "--n-assets", "2", "--n-bars", "40"]) == 0
    s = read_price_csv(tmp_path / "prices" / "F01.csv", "F01")
    write_price_csv(s, tmp_path / "copy.csv")
    assert (tmp_path / "copy.csv").read_bytes() == (tmp_path / "prices" / "F01.csv").read_bytes()
    p = read_panel_csv(tmp_path / "esg.csv")
    assert p.firms == ("F01", "F02")


def test_manifest_tracks_input_changes(fixtures, tmp_path):
    panel = tmp_path / "panel.csv"
    shutil.copy(fixtures / "panel.csv", panel)
    assert main(["corr", "--panel", str(panel), "-o", str(tmp_path / "a")]) == 0
    before = read_manifest(tmp_path / "a" / "manifest.txt")
    panel.write_text(panel.read_text().replace("F01,", "F01x,", 1))
    assert main(["corr", "--panel", str(panel), "-o", str(tmp_path / "b")]) == 0
    after = read_manifest(tmp_path / "b" / "manifest.txt")
    key = [k for k in before if k.startswith("input.")][0]
    assert before[key] != after[key]


def test_layered_configs(tmp_path):
    syn = tmp_path / "syn"
    assert main(["synth", "--seed", "3", "-o", str(syn), "--n-assets", "6", "--n-firms", "6"]) == 0
    extra = tmp_path / "elsewhere" / "bt.ini"
    extra.parent.mkdir()
    extra.write_text("[run]\nseed = 4\n\n[strategies]\nsources = SA, median\nreward = dmv_N\n\n[backtest]\ncost = 0.001\n")
    out = tmp_path / "r"
    assert main(["backtest", "-c", str(syn / "portfolio.ini"), "-c", str(extra), "-o", str(out)]) == 0
    rows = _rows(out / "report.csv")
    assert {r["strategy"] for r in rows} == {"SA", "median"}
    man = read_manifest(out / "manifest.txt")
    assert man["seed"] == "4" and f"input.{extra.as_posix()}" in man
