"""Sliding-window analysis, ensembles and distribution-separation tests."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from types import SimpleNamespace

import numpy as np

from . import indicators
from .exceptions import (
    ConfigError,
    EnsembleUnreliableError,
    LangevinEWSError,
    NoEquilibriumError,
    TooFewSamplesError,
)
from .io import write_rows
from .models import equilibrium, integrate_ensemble
from .preprocess import detrend_linear, partition
from .stability import StabilityConfig, lambda_for_window


@dataclass(frozen=True)
class AnalysisConfig:
    """Windowing, estimator and ensemble settings.

    ``stride=None`` means non-overlapping windows. ``band`` is the 68% band
    (16th-84th percentiles); ``percentiles`` the 95% interval used by
    :func:`separation_test`.
    """

    window_len: float = 100.0
    stride: float | None = None
    M: int = 50
    m: float = 0.5
    bandwidth: float | None = None
    min_weight_mass: float | None = None
    N: int = 100
    seed: int = 0
    percentiles: tuple = (2.5, 97.5)
    band: tuple = (16.0, 84.0)
    max_failure_fraction: float = 0.2
    min_points: int | None = None
    n_jobs: int = 1
    keep_members: bool = True

    def __post_init__(self):
        if not self.window_len > 0:
            raise ConfigError("window_len must be positive")
        if self.stride is not None and not self.stride > 0:
            raise ConfigError("stride must be positive")
        if not 0 < self.m <= 1:
            raise ConfigError("m must lie in (0, 1]")
        if self.M < 2:
            raise ConfigError("M must be at least 2")

    @property
    def stability(self):
        return StabilityConfig(self.M, self.m, self.bandwidth, self.min_weight_mass)


@dataclass(frozen=True)
class SimulationConfig:
    """Integration span and sampling; the inner step is ``dt / substeps``."""

    t0: float = 0.0
    t_end: float = 1000.0
    dt: float = 0.1
    substeps: int = 10
    x0: tuple | None = None
    bound: float = 1e6

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("x0") is not None:
            d["x0"] = tuple(np.atleast_1d(d["x0"]).tolist())
        return cls(**d)

    def run(self, model, seeds, on_blowup="truncate"):
        return integrate_ensemble(
            model,
            seeds,
            self.t0,
            self.t_end,
            self.dt / self.substeps,
            self.substeps,
            x0=self.x0,
            bound=self.bound,
            on_blowup=on_blowup,
        )


@dataclass
class WindowRecord:
    time: float
    variance: np.ndarray
    ac1: np.ndarray
    lambdas: np.ndarray
    oscillatory: np.ndarray
    diffusion: np.ndarray
    diffusion_slope: float = float("nan")
    lambda_by_axis: np.ndarray | None = None
    status: str = "ok"
    message: str = ""
    estimate: object = None
    diffusion_profile: tuple | None = None

    @property
    def ok(self):
        return self.status == "ok"


def _nan(n):
    return np.full(n, np.nan)


def trend_slope(times, values):
    """OLS slope of ``values`` against ``times``, ignoring NaN entries."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = np.isfinite(values)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(times[keep], values[keep], 1)[0])


def diffusion_summary(est):
    """Noise amplitude summaries from the estimated diffusion field.

    Returns the mean of ``sqrt(diag(BB^T))`` over the valid central-subgrid
    points (physical units), the least-squares slope of ``sqrt(BB^T[0, 0])``
    against the first coordinate and the ``(x1, sqrt(BB^T[0, 0]))`` profile
    that slope was fitted to. For ``n >= 2`` the profile is the line of
    subgrid points whose other coordinates sit at the grid index nearest the
    estimated equilibrium.
    """
    fld, sub = est.field, est.subgrid
    grid = fld.grid
    diag = np.sqrt(np.clip(np.diagonal(fld.physical_diffusion()[sub.indices], axis1=1, axis2=2), 0, None))
    mean_amp = diag.mean(axis=0)
    multi = np.array(np.unravel_index(sub.indices, grid.shape))
    line = np.ones(len(sub.indices), dtype=bool)
    if grid.n > 1:
        centre = grid.nearest_index(est.x_star / fld.scale)
        for j in range(1, grid.n):
            line &= multi[j] == centre[j]
    x1 = fld.physical_points()[sub.indices, 0][line]
    amp = diag[line, 0]
    slope = float(np.polyfit(x1, amp, 1)[0]) if len(x1) >= 2 else float("nan")
    return mean_amp, slope, (x1, amp)


def analyze_window(w, cfg=AnalysisConfig()):
    n = w.n
    if not w.is_finite:
        return WindowRecord(
            w.center_time, _nan(n), _nan(n), _nan(n), np.zeros(n, bool), _nan(n),
            status="non_finite", message="window contains non-finite samples (blow-up)",
        )
    try:
        centred = detrend_linear(w)
        var = indicators.variance(centred)
        ac = indicators.ac1(centred)
        est = lambda_for_window(w, cfg.stability)
    except LangevinEWSError as exc:
        return WindowRecord(
            w.center_time, _nan(n), _nan(n), _nan(n), np.zeros(n, bool), _nan(n),
            status=exc.category, message=str(exc),
        )
    amp, slope, profile = diffusion_summary(est)
    by_axis = np.empty(n)
    by_axis[est.axes.permutation] = est.lambdas
    return WindowRecord(
        w.center_time, var, ac, est.lambdas, est.oscillatory, amp, slope, by_axis,
        estimate=est, diffusion_profile=profile,
    )


def _windows(values, t0, dt, cfg):
    src = SimpleNamespace(values=np.atleast_2d(np.asarray(values, dtype=float)), t0=t0, dt=dt)
    return partition(src, cfg.window_len, cfg.stride, cfg.min_points)


@dataclass
class IndicatorSeries:
    """One record per analysed window, in time order."""

    n: int
    records: list

    @property
    def times(self):
        return np.array([r.time for r in self.records])

    def column(self, name):
        """Stack an attribute (e.g. ``"lambdas"``) into ``(windows, n)``."""
        return np.array([np.atleast_1d(getattr(r, name)) for r in self.records], dtype=float)

    @property
    def header(self):
        n = self.n
        cols = ["time"]
        for prefix in ("var", "ac1", "lambda"):
            cols += [f"{prefix}_{j + 1}" for j in range(n)]
        cols.append("osc_flags")
        cols += [f"diff_{j + 1}" for j in range(n)]
        cols.append("diff_slope")
        cols += [f"lambda_axis_{j + 1}" for j in range(n)]
        return cols + ["status"]

    def rows(self):
        for r in self.records:
            by_axis = r.lambda_by_axis if r.lambda_by_axis is not None else _nan(self.n)
            flags = "".join("1" if o else "0" for o in r.oscillatory)
            yield [r.time, *r.variance, *r.ac1, *r.lambdas, flags, *r.diffusion,
                   r.diffusion_slope, *by_axis, r.status]

    def to_array(self):
        """Numeric matrix (windows x columns) without the flag/status columns."""
        return np.array(
            [[r.time, *r.variance, *r.ac1, *r.lambdas, *r.diffusion] for r in self.records]
        )

    def to_csv(self, path):
        write_rows(path, self.header, self.rows())

    def stability_records(self):
        out = []
        for r in self.records:
            rec = r.estimate.to_record() if r.estimate is not None else {"time": r.time}
            rec["status"] = r.status
            if r.message:
                rec["message"] = r.message
            out.append(rec)
        return out


def analyze_values(values, t0, dt, cfg=AnalysisConfig()):
    windows = _windows(values, t0, dt, cfg)
    return IndicatorSeries(len(values), [analyze_window(w, cfg) for w in windows])


def analyze(ts, cfg=AnalysisConfig()):
    """Conventional indicators and lambda-hat for every window of ``ts``.

    Windows whose estimation fails keep their slot with a status code.
    """
    series = analyze_values(ts.values, ts.t0, ts.dt, cfg)
    if not any(r.ok for r in series.records):
        first = series.records[0]
        raise type_for(first.status)(f"no analysable window: {first.message}")
    return series


def type_for(category):
    for cls in _all_error_types():
        if cls.category == category:
            return cls
    return LangevinEWSError


def _all_error_types():
    stack, seen = [LangevinEWSError], []
    while stack:
        cls = stack.pop()
        seen.append(cls)
        stack.extend(cls.__subclasses__())
    return seen


# ---------------------------------------------------------------------------
# Ensembles

INDICATORS = ("variance", "ac1", "lambdas", "diffusion", "lambda_by_axis")


@dataclass
class EnsembleResult:
    """Per-window ensemble statistics for each indicator.

    ``stats[name][key]`` has shape ``(windows, n)`` with keys ``mean``,
    ``p16``/``p84`` (the 68% band) and ``lo``/``hi`` (the 95% interval);
    ``members[name]`` holds the raw ``(N, windows, n)`` values.
    """

    times: np.ndarray
    n: int
    N: int
    stats: dict
    n_ok: np.ndarray
    failures: dict
    members: dict = field(default_factory=dict)
    series: list = field(default_factory=list)
    config: AnalysisConfig | None = None

    def mean(self, name):
        return self.stats[name]["mean"]

    @property
    def header(self):
        cols = ["time", "n_ok"]
        for name in INDICATORS:
            for j in range(self.n):
                for key in ("mean", "p16", "p84", "lo", "hi"):
                    cols.append(f"{name}_{j + 1}_{key}")
        return cols

    def rows(self):
        for i, t in enumerate(self.times):
            row = [t, int(self.n_ok[i])]
            for name in INDICATORS:
                for j in range(self.n):
                    for key in ("mean", "p16", "p84", "lo", "hi"):
                        row.append(self.stats[name][key][i, j])
            yield row

    def to_csv(self, path):
        write_rows(path, self.header, self.rows())


def _analyze_member(args):
    values, t0, dt, cfg = args
    try:
        return analyze_values(values, t0, dt, cfg)
    except LangevinEWSError as exc:
        return exc


def _map(func, items, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * n_jobs))))


def aggregate(series_list, n, cfg):
    """Combine member series (``None`` for failed members) into an EnsembleResult."""
    good = [s for s in series_list if s is not None]
    if not good:
        raise EnsembleUnreliableError("ensemble unreliable: every member failed")
    times = good[0].times
    W, N = len(times), len(series_list)
    members = {name: np.full((N, W, n), np.nan) for name in INDICATORS}
    for i, s in enumerate(series_list):
        if s is None:
            continue
        for name in INDICATORS:
            for k, r in enumerate(s.records):
                if r.ok:
                    members[name][i, k] = getattr(r, name)
    n_ok = np.array([[s.records[k].ok for s in good] for k in range(W)]).sum(axis=1)
    lo, hi = cfg.percentiles
    b_lo, b_hi = cfg.band
    stats = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for name, arr in members.items():
            stats[name] = {
                "mean": np.nanmean(arr, axis=0),
                "p16": np.nanpercentile(arr, b_lo, axis=0),
                "p84": np.nanpercentile(arr, b_hi, axis=0),
                "lo": np.nanpercentile(arr, lo, axis=0),
                "hi": np.nanpercentile(arr, hi, axis=0),
            }
    return times, stats, n_ok, members


def ensemble(model, cfg=AnalysisConfig(), sim=SimulationConfig()):
    """Simulate ``cfg.N`` members (seeds ``cfg.seed + i``) and analyse each.

    A member fails when none of its windows can be analysed; failed members
    are excluded and more than ``max_failure_fraction`` of them is an error.
    Windows lost to a blow-up only drop out of that window's statistics.
    """
    if cfg.N < 2:
        raise ConfigError("an ensemble needs N >= 2")
    seeds = [cfg.seed + i for i in range(cfg.N)]
    traj = sim.run(model, seeds)
    jobs = [(traj.values[i], traj.t0, traj.dt, cfg) for i in range(cfg.N)]
    results = _map(_analyze_member, jobs, cfg.n_jobs)
    failures = {}
    series_list = []
    for i, res in enumerate(results):
        if isinstance(res, Exception):
            failures[i] = f"{res.category}: {res}"
            series_list.append(None)
        elif not any(r.ok for r in res.records):
            failures[i] = "no analysable window"
            series_list.append(None)
        else:
            series_list.append(res)
    if len(failures) > cfg.max_failure_fraction * cfg.N:
        raise EnsembleUnreliableError(
            f"ensemble unreliable: {len(failures)} of {cfg.N} members failed"
        )
    times, stats, n_ok, members = aggregate(series_list, model.dim, cfg)
    return EnsembleResult(
        times,
        model.dim,
        cfg.N,
        stats,
        n_ok,
        failures,
        members=members if cfg.keep_members else {},
        series=series_list if cfg.keep_members else [],
        config=cfg,
    )


# ---------------------------------------------------------------------------
# Detection criterion


@dataclass(frozen=True)
class SeparationResult:
    separated: bool
    a_lo: float
    a_hi: float
    b_lo: float
    b_hi: float

    def __bool__(self):
        return self.separated


def separation_test(samples_a, samples_b, lower_pct=2.5, upper_pct=97.5, min_samples=20):
    """True iff the central percentile intervals of the two samples are disjoint.

    Percentiles use linear interpolation between order statistics; non-finite
    samples are dropped first.
    """
    a = np.asarray(samples_a, dtype=float).ravel()
    b = np.asarray(samples_b, dtype=float).ravel()
    a, b = a[np.isfinite(a)], b[np.isfinite(b)]
    if len(a) < min_samples or len(b) < min_samples:
        raise TooFewSamplesError(
            f"too few samples for a separation test: {len(a)} and {len(b)} (need {min_samples})"
        )
    a_lo, a_hi = np.percentile(a, [lower_pct, upper_pct])
    b_lo, b_hi = np.percentile(b, [lower_pct, upper_pct])
    separated = bool(a_hi < b_lo or b_hi < a_lo)
    return SeparationResult(separated, float(a_lo), float(a_hi), float(b_lo), float(b_hi))


def single_window_indicators(model, T, dt, cfg, seed, substeps=10, dim=0):
    """Indicator samples from ``cfg.N`` series of length ``T``, each one window.

    Returns ``{"variance", "ac1", "lambda"}`` arrays of length ``N``; lambda is
    the largest estimated restoring rate (the only one in 1D).
    """
    sim = SimulationConfig(0.0, T, dt, substeps)
    traj = sim.run(model, [seed + i for i in range(cfg.N)])
    wcfg = replace(cfg, window_len=T, stride=None)
    out = {"variance": [], "ac1": [], "lambda": []}
    for i in range(cfg.N):
        rec = analyze_values(traj.values[i], traj.t0, traj.dt, wcfg).records[0]
        out["variance"].append(rec.variance[dim])
        out["ac1"].append(rec.ac1[dim])
        out["lambda"].append(np.max(rec.lambdas) if rec.ok else np.nan)
    return {k: np.asarray(v) for k, v in out.items()}


@dataclass
class DetectionCell:
    T: float
    dt: float
    indicator: str
    status: str
    result: SeparationResult | None = None

    @property
    def separated(self):
        return self.result is not None and self.result.separated

    def row(self):
        r = self.result
        vals = [r.a_lo, r.a_hi, r.b_lo, r.b_hi] if r is not None else [math.nan] * 4
        return [self.T, self.dt, self.indicator, int(self.separated), self.status, *vals]


@dataclass
class DetectionGrid:
    cells: list
    samples: dict = field(default_factory=dict)

    header = ["T", "dt", "indicator", "separated", "status", "a_lo", "a_hi", "b_lo", "b_hi"]

    def lookup(self, T, dt, indicator):
        for c in self.cells:
            if math.isclose(c.T, T) and math.isclose(c.dt, dt) and c.indicator == indicator:
                return c
        raise KeyError((T, dt, indicator))

    def to_csv(self, path):
        write_rows(path, self.header, (c.row() for c in self.cells))


def detection_grid(model_a, model_b, T_values, dt_values, cfg=AnalysisConfig(), dim=0,
                   substeps=10, keep_samples=False):
    """Separation test per (T, dt) cell and indicator between two models.

    Members of ``model_b`` use seeds offset by ``cfg.N`` so that the two
    samples are independent. Failing cells are marked ``inconclusive``.
    """
    if not len(T_values) or not len(dt_values):
        raise ConfigError("T and dt value lists must be non-empty")
    cells, samples = [], {}
    for T in T_values:
        for dt in dt_values:
            try:
                sa = single_window_indicators(model_a, T, dt, cfg, cfg.seed, substeps, dim)
                sb = single_window_indicators(model_b, T, dt, cfg, cfg.seed + cfg.N, substeps, dim)
            except LangevinEWSError as exc:
                for name in ("variance", "ac1", "lambda"):
                    cells.append(DetectionCell(T, dt, name, f"inconclusive: {exc.category}"))
                continue
            if keep_samples:
                samples[(T, dt)] = (sa, sb)
            for name in ("variance", "ac1", "lambda"):
                try:
                    res = separation_test(sa[name], sb[name], *cfg.percentiles)
                    cells.append(DetectionCell(T, dt, name, "ok", res))
                except LangevinEWSError as exc:
                    cells.append(DetectionCell(T, dt, name, f"inconclusive: {exc.category}"))
    return DetectionGrid(cells, samples)


def bifurcation_time(model, t_lo, t_hi, tol=1e-6):
    """First time in ``[t_lo, t_hi]`` at which the occupied equilibrium is lost.

    Returns ``inf`` if an equilibrium exists at ``t_hi``.
    """
    def exists(t):
        try:
            equilibrium(model, t)
            return True
        except NoEquilibriumError:
            return False

    if not exists(t_lo):
        return t_lo
    if exists(t_hi):
        return math.inf
    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        if exists(mid):
            t_lo = mid
        else:
            t_hi = mid
    return 0.5 * (t_lo + t_hi)
