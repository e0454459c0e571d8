"""Reproducible experiment bundles: scenario settings, CSV outputs and checks.

Each experiment returns an :class:`ExperimentOutput` whose ``summary`` lists
named pass/fail checks. ``N`` defaults to the desk-scale value of 100 unless
the scenario fixes its own sample size; the value used is always recorded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import ConfigError
from .io import dump_json
from .models import ModelSpec, Ramp
from .pipeline import (
    AnalysisConfig,
    SimulationConfig,
    bifurcation_time,
    detection_grid,
    ensemble,
    trend_slope,
)


@dataclass
class Check:
    name: str
    passed: bool
    value: object = None
    target: object = None

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": self.value,
                "target": self.target}


@dataclass
class ExperimentOutput:
    name: str
    params: dict
    checks: list
    tables: dict = field(default_factory=dict)  # file name -> writer(path)
    data: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def summary(self):
        return {
            "experiment": self.name,
            "version": __version__,
            "parameters": self.params,
            "band": "16th-84th ensemble percentiles",
            "checks": [c.as_dict() for c in self.checks],
            "passed": self.passed,
        }

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for fname, writer in self.tables.items():
            writer(out / fname)
        dump_json(self.summary(), out / "summary.json")
        return out


DESK_N = 100


def _ensemble_tables(res):
    return {"series.csv": res.to_csv}


def _strictly_decreasing(x):
    x = np.asarray(x)
    return bool(np.all(np.isfinite(x)) and np.all(np.diff(x) < 0))


def fig1(N=DESK_N, seed=0, n_jobs=1):
    """Fold ramp: alpha 1 -> 0, sigma 0.2 -> 0.06 over 1000 time units."""
    model = ModelSpec("fold", {"alpha": Ramp(1.0, 0.0, 0.0, 1000.0),
                               "sigma": Ramp(0.2, 0.06, 0.0, 1000.0)})
    sim = SimulationConfig(0.0, 1000.0, 0.1)
    cfg = AnalysisConfig(window_len=100.0, N=N, seed=seed, n_jobs=n_jobs)
    res = ensemble(model, cfg, sim)
    t = res.times
    var, ac, lam = (res.mean(k)[:, 0] for k in ("variance", "ac1", "lambdas"))
    sigma = np.array([model.at(tc)["sigma"] for tc in t])
    amp = res.mean("diffusion")[:, 0]
    rel = np.abs(amp / sigma - 1.0)
    checks = [
        Check("variance_trend_negative", trend_slope(t, var) < 0, trend_slope(t, var), "< 0"),
        Check("ac1_trend_positive", trend_slope(t, ac) > 0, trend_slope(t, ac), "> 0"),
        Check("lambda_trend_negative", trend_slope(t, lam) < 0, trend_slope(t, lam), "< 0"),
        Check("lambda_strictly_decreasing", _strictly_decreasing(lam), lam.tolist(), "strict"),
        Check("diffusion_within_20pct_of_sigma", bool(np.all(rel <= 0.2)), rel.tolist(), "<= 0.2"),
    ]
    params = {"model": model.to_config(), "dt": sim.dt, "t_end": sim.t_end,
              "window_len": cfg.window_len, "N": N, "seed": seed,
              "failed_members": len(res.failures)}
    return ExperimentOutput("fig1", params, checks, _ensemble_tables(res), {"result": res})


def pooled_diffusion_slope(series, window_len, t_max):
    """Slope of one line through the diffusion profiles of every window ending by ``t_max``."""
    xs, ys = [], []
    for rec in series.records:
        if not rec.ok or rec.time + 0.5 * window_len > t_max:
            continue
        xs.append(rec.diffusion_profile[0])
        ys.append(rec.diffusion_profile[1])
    if not xs:
        return math.nan
    x, y = np.concatenate(xs), np.concatenate(ys)
    return float(np.polyfit(x, y, 1)[0]) if len(x) >= 2 else math.nan


def fig2(N=DESK_N, seed=0, n_jobs=1):
    """Predator-prey with the turbidity ramp 1 -> 0.3 over 1000 time units, sampled at 0.02."""
    model = ModelSpec("predatorprey")
    sim = SimulationConfig(0.0, 1000.0, 0.02)
    cfg = AnalysisConfig(window_len=100.0, N=N, seed=seed, n_jobs=n_jobs)
    res = ensemble(model, cfg, sim)
    t_c = bifurcation_time(model, sim.t0, sim.t_end)
    before = res.times + 0.5 * cfg.window_len <= t_c
    lam_p = res.mean("lambda_by_axis")[:, 0]
    slope = trend_slope(res.times[before], lam_p[before])
    member_slopes = np.array(
        [pooled_diffusion_slope(s, cfg.window_len, t_c) for s in res.series if s is not None]
    )
    diff_slope = float(np.nanmean(member_slopes))
    target = model.params["sigma_P"].start_value / math.sqrt(model.params["xi"].start_value)
    checks = [
        Check("prey_lambda_trend_negative", slope < 0, slope, "< 0"),
        Check("prey_lambda_decreases_toward_zero",
              bool(lam_p[before][-1] < lam_p[before][0] and lam_p[before][-1] > 0),
              lam_p[before].tolist(), "last < first, > 0"),
        Check("diffusion_slope_in_range", 0.035 <= diff_slope <= 0.055, diff_slope,
              [0.035, 0.055]),
    ]
    params = {"model": model.to_config(), "dt": sim.dt, "t_end": sim.t_end,
              "window_len": cfg.window_len, "N": N, "seed": seed,
              "transition_time": t_c, "windows_before_transition": int(before.sum()),
              "diffusion_slope_target": target, "failed_members": len(res.failures)}
    tables = _ensemble_tables(res)
    return ExperimentOutput("fig2", params, checks, tables,
                            {"result": res, "member_diffusion_slopes": member_slopes})


def _grid_experiment(name, model_a, model_b, N, seed, T_values, dt_values, dim, n_jobs):
    cfg = AnalysisConfig(N=N, seed=seed, n_jobs=n_jobs)
    grid = detection_grid(model_a, model_b, T_values, dt_values, cfg, dim=dim, keep_samples=True)
    params = {"model_a": model_a.to_config(), "model_b": model_b.to_config(), "N": N,
              "seed": seed, "T_values": list(T_values), "dt_values": list(dt_values),
              "percentiles": list(cfg.percentiles), "indicator_dimension": dim + 1}
    return grid, params


def _cell_check(grid, T, dt, indicator, expected):
    try:
        cell = grid.lookup(T, dt, indicator)
    except KeyError:
        return None
    r = cell.result
    value = None if r is None else {"separated": r.separated,
                                     "a": [r.a_lo, r.a_hi], "b": [r.b_lo, r.b_hi]}
    name = f"{indicator}_{'separates' if expected else 'does_not_separate'}_T{T:g}_dt{dt:g}"
    return Check(name, cell.status == "ok" and cell.separated == expected, value, expected)


def _grid_samples_table(grid):
    def write(path):
        from .io import write_rows

        rows = []
        for (T, dt), (sa, sb) in grid.samples.items():
            for label, s in (("a", sa), ("b", sb)):
                for i in range(len(s["variance"])):
                    rows.append([T, dt, label, i, s["variance"][i], s["ac1"][i], s["lambda"][i]])
        write_rows(path, ["T", "dt", "model", "member", "variance", "ac1", "lambda"], rows)

    return write


def fig3(N=1000, seed=0, n_jobs=1, T_values=(10.0, 100.0), dt_values=(0.1,)):
    """One-dimensional OU, lambda = 1 against lambda = 0.1 (sigma = 1)."""
    a = ModelSpec("ou1d", {"lam": 1.0, "sigma": 1.0})
    b = ModelSpec("ou1d", {"lam": 0.1, "sigma": 1.0})
    grid, params = _grid_experiment("fig3", a, b, N, seed, T_values, dt_values, 0, n_jobs)
    checks = []
    for ind in ("variance", "ac1", "lambda"):
        checks.append(_cell_check(grid, 100.0, 0.1, ind, True))
    checks.append(_cell_check(grid, 10.0, 0.1, "lambda", False))
    checks.append(_cell_check(grid, 10.0, 0.1, "variance", True))
    if (100.0, 0.1) in grid.samples:
        sa = grid.samples[(100.0, 0.1)][0]
        mv, ma, ml = (float(np.mean(sa[k])) for k in ("variance", "ac1", "lambda"))
        q1, q3 = np.percentile(sa["lambda"], [25, 75])
        biased = (1.0 - math.exp(-0.1)) / 0.1
        checks += [
            Check("ou_mean_variance_in_range", 0.48 <= mv <= 0.52, mv, [0.48, 0.52]),
            Check("ou_mean_ac1_in_range", 0.89 <= ma <= 0.92, ma, [0.89, 0.92]),
            Check("ou_mean_lambda_in_range", 0.85 <= ml <= 1.0, ml, [0.85, 1.0]),
            Check("ou_lambda_iqr_contains_biased_target", bool(q1 <= biased <= q3),
                  [float(q1), float(q3)], biased),
        ]
    checks = [c for c in checks if c is not None]
    tables = {"grid.csv": grid.to_csv, "samples.csv": _grid_samples_table(grid)}
    return ExperimentOutput("fig3", params, checks, tables, {"grid": grid})


def _ou2d(lam1, angle):
    return ModelSpec("ou2d", {"lam1": lam1, "lam2": 1.0, "sigma1": 1.0, "sigma2": 1.0,
                              "c": 0.0, "angle": angle})


def fig4(N=500, seed=0, n_jobs=1, T_values=(100.0,), dt_values=(0.1,)):
    """Two-dimensional OU with axis-aligned eigenvectors, lambda_1 = 3 against 1."""
    grid, params = _grid_experiment("fig4", _ou2d(3.0, 0.0), _ou2d(1.0, 0.0), N, seed,
                                    T_values, dt_values, 0, n_jobs)
    checks = [_cell_check(grid, 100.0, 0.1, ind, True) for ind in ("variance", "ac1", "lambda")]
    checks = [c for c in checks if c is not None]
    tables = {"grid.csv": grid.to_csv, "samples.csv": _grid_samples_table(grid)}
    return ExperimentOutput("fig4", params, checks, tables, {"grid": grid})


def fig5(N=500, seed=0, n_jobs=1, T_values=(100.0,), dt_values=(0.1,)):
    """As fig4 with the eigenbasis rotated by 45 degrees."""
    grid, params = _grid_experiment("fig5", _ou2d(3.0, 45.0), _ou2d(1.0, 45.0), N, seed,
                                    T_values, dt_values, 0, n_jobs)
    checks = [
        _cell_check(grid, 100.0, 0.1, "variance", False),
        _cell_check(grid, 100.0, 0.1, "ac1", False),
        _cell_check(grid, 100.0, 0.1, "lambda", True),
    ]
    checks = [c for c in checks if c is not None]
    tables = {"grid.csv": grid.to_csv, "samples.csv": _grid_samples_table(grid)}
    return ExperimentOutput("fig5", params, checks, tables, {"grid": grid})


def fig6(N=200, seed=0, n_jobs=1):
    """Hopf normal form with mu ramped 2 -> 0.1, omega = 1, eps = 0.01."""
    model = ModelSpec("hopf", {"mu": Ramp(2.0, 0.1, 0.0, 1000.0), "omega": 1.0, "eps": 0.01})
    sim = SimulationConfig(0.0, 1000.0, 0.1)
    cfg = AnalysisConfig(window_len=100.0, N=N, seed=seed, n_jobs=n_jobs)
    res = ensemble(model, cfg, sim)
    recs = [r for s in res.series if s is not None for r in s.records]
    all_osc = bool(recs) and all(r.ok and bool(np.all(r.oscillatory)) for r in recs)
    gap = max(float(np.max(r.lambdas) - np.min(r.lambdas)) for r in recs if r.ok)
    mu = np.array([model.at(t)["mu"] for t in res.times])
    lam = res.mean("lambdas")[:, 0]
    err = np.abs(lam - mu)
    checks = [
        Check("all_windows_oscillatory", all_osc, all_osc, True),
        Check("lambda_pair_coincides", gap < 1e-8, gap, "< 1e-8"),
        Check("mean_lambda_tracks_mu", bool(np.all(err[:-1] <= 0.15)), err.tolist(),
              "<= 0.15 except last window"),
    ]
    params = {"model": model.to_config(), "dt": sim.dt, "t_end": sim.t_end,
              "window_len": cfg.window_len, "N": N, "seed": seed, "mu_center": mu.tolist(),
              "failed_members": len(res.failures)}
    return ExperimentOutput("fig6", params, checks, _ensemble_tables(res), {"result": res})


EXPERIMENTS = {"fig1": fig1, "fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5,
               "fig6": fig6}


def run_experiment(name, N=None, seed=0, out=None, n_jobs=1, **overrides):
    """Run a named experiment, optionally writing its bundle to ``out``."""
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    func = EXPERIMENTS[name]
    import inspect

    allowed = set(inspect.signature(func).parameters) - {"N", "seed", "n_jobs"}
    bad = set(overrides) - allowed
    if bad:
        raise ConfigError(f"invalid overrides for {name}: {sorted(bad)}")
    kwargs = dict(overrides, seed=seed, n_jobs=n_jobs)
    if N is not None:
        if int(N) < 2:
            raise ConfigError("N must be at least 2")
        kwargs["N"] = int(N)
    result = func(**kwargs)
    if out is not None:
        result.write(out)
    return result
