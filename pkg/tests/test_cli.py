import json

import pytest

from langevin_ews.cli import main

FOLD_CFG = """model:
  variant: fold
  parameters:
    alpha: {start: 1.0, end: 0.3, t_start: 0, t_end: 200}
    sigma: 0.1
simulation:
  t_end: 200
  dt: 0.1
"""


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.fixture
def series_csv(tmp_path):
    cfg = tmp_path / "fold.yaml"
    cfg.write_text(FOLD_CFG)
    out = tmp_path / "fold.csv"
    assert main(["simulate", "--model", str(cfg), "--out", str(out), "--seed", "5"]) == 0
    return out


def test_simulate_is_reproducible(series_csv, tmp_path):
    again = tmp_path / "again.csv"
    cfg = tmp_path / "fold.yaml"
    assert main(["simulate", "--model", str(cfg), "--out", str(again), "--seed", "5"]) == 0
    assert again.read_bytes() == series_csv.read_bytes()
    assert series_csv.read_text().splitlines()[0] == "t,x1"


def test_analyze_writes_bundle(series_csv, tmp_path):
    out = tmp_path / "an"
    rc = main(["analyze", "--in", str(series_csv), "--window", "50", "--stride", "25",
               "--M", "40", "--out", str(out)])
    assert rc == 0
    lines = (out / "series.csv").read_text().splitlines()
    assert lines[0].startswith("time,var_1,ac1_1,lambda_1,osc_flags,diff_1")
    assert len(lines) == 1 + 7
    assert len(list((out / "fields").glob("window_*.csv"))) == 7
    recs = json.loads((out / "stability.json").read_text())
    assert recs[0]["status"] == "ok" and "lambda" in recs[0]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["M"] == 40


def test_analyze_overlap_flag(series_csv, tmp_path):
    out = tmp_path / "ov"
    assert main(["analyze", "--in", str(series_csv), "--window", "50", "--overlap", "0.5",
                 "--out", str(out)]) == 0
    assert len((out / "series.csv").read_text().splitlines()) == 1 + 7


@pytest.mark.parametrize(
    "argv, category",
    [
        (["analyze", "--in", "missing.csv", "--window", "50", "--out", "x"], "io"),
        (["experiment", "fig7"], "usage"),
        (["simulate", "--out", "x.csv"], "usage"),
        (["grid", "--models", "m.yaml", "--T", "ten", "--dt", "0.1"], "usage"),
    ],
)
def test_errors_are_machine_readable(argv, category, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) != 0
    assert _err(capsys)["error"] == category


def test_domain_errors_use_their_category(series_csv, tmp_path, capsys):
    rc = main(["analyze", "--in", str(series_csv), "--window", "0.5", "--out", str(tmp_path / "o")])
    assert rc == 2 and _err(capsys)["error"] == "series_too_short"
    rc = main(["analyze", "--in", str(series_csv), "--window", "50", "--stride", "10",
               "--overlap", "0.5", "--out", str(tmp_path / "o")])
    assert rc == 2 and _err(capsys)["error"] == "config"
    bad = tmp_path / "bad.yaml"
    bad.write_text("model: {variant: fold, parameters: {beta: 1}}\n")
    assert main(["simulate", "--model", str(bad), "--out", str(tmp_path / "z.csv")]) == 2
    assert _err(capsys)["error"] == "config"
    blow = tmp_path / "blow.yaml"
    blow.write_text("model: {variant: fold, parameters: {alpha: -1, sigma: 0}}\n"
                    "simulation: {t_end: 100, x0: [0.0]}\n")
    assert main(["simulate", "--model", str(blow), "--out", str(tmp_path / "z.csv")]) == 2
    assert _err(capsys)["error"] == "blow_up"


def test_grid_command(tmp_path, capsys):
    cfg = tmp_path / "pair.yaml"
    cfg.write_text("model_a: {variant: ou1d, parameters: {lam: 1.0}}\n"
                   "model_b: {variant: ou1d, parameters: {lam: 0.1}}\nN: 20\n")
    out = tmp_path / "g"
    assert main(["grid", "--models", str(cfg), "--T", "50,100", "--dt", "0.1", "--out", str(out)]) == 0
    rows = (out / "grid.csv").read_text().splitlines()
    assert rows[0] == "T,dt,indicator,separated,status,a_lo,a_hi,b_lo,b_hi"
    assert len(rows) == 1 + 6
    cfg.write_text("model_a: {variant: ou1d}\nmodel_c: {variant: ou1d}\n")
    assert main(["grid", "--models", str(cfg), "--T", "50", "--dt", "0.1"]) == 2
    assert _err(capsys)["error"] == "config"


def test_experiment_command(tmp_path, capsys):
    out = tmp_path / "fig1"
    assert main(["experiment", "fig1", "--N", "4", "--seed", "1", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["parameters"]["N"] == 4
    assert {c["name"] for c in summary["checks"]} >= {"lambda_trend_negative"}
    assert (out / "series.csv").exists()
