import pytest

from langevin_ews.exceptions import ConfigError
from langevin_ews.experiments import EXPERIMENTS, run_experiment


def test_unknown_experiment_and_overrides():
    with pytest.raises(ConfigError):
        run_experiment("fig7")
    with pytest.raises(ConfigError):
        run_experiment("fig1", window_len=50.0)
    with pytest.raises(ConfigError):
        run_experiment("fig3", N=1)
    assert sorted(EXPERIMENTS) == [f"fig{i}" for i in range(1, 7)]


def test_outputs_are_byte_identical(tmp_path):
    a = run_experiment("fig3", N=25, seed=3, out=tmp_path / "a", T_values=(50.0,))
    b = run_experiment("fig3", N=25, seed=3, out=tmp_path / "b", T_values=(50.0,))
    for name in ("grid.csv", "samples.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert a.summary() == b.summary()


def test_parallel_members_do_not_change_output(tmp_path):
    run_experiment("fig1", N=4, seed=0, out=tmp_path / "serial")
    run_experiment("fig1", N=4, seed=0, out=tmp_path / "pool", n_jobs=2)
    for name in ("series.csv", "summary.json"):
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "pool" / name).read_bytes()


def test_grid_overrides_restrict_checks():
    res = run_experiment("fig3", N=25, T_values=(100.0,))
    names = [c.name for c in res.checks]
    assert "lambda_separates_T100_dt0.1" in names
    assert not any("T10_" in n for n in names)
    assert res.summary()["parameters"]["T_values"] == [100.0]
