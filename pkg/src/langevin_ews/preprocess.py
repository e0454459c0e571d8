"""Windowing, linear detrending and unit-variance normalisation."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DegenerateDimensionError, SeriesTooShortError, WindowModeError

RAW = "raw"
CENTERED = "detrended-centered"
MEAN_RETAINED = "detrended-mean-retained"
NORMALIZED = "normalized"


@dataclass(frozen=True)
class Window:
    """Contiguous slice of a time series plus preprocessing metadata.

    ``trend`` holds per-dimension ``(slope, intercept)`` of the removed line,
    with time measured from the window start; ``scale`` holds the factors the
    values were divided by (ones until normalised).
    """

    dt: float
    start_index: int
    values: np.ndarray
    t0: float = 0.0
    trend: np.ndarray | None = None
    scale: np.ndarray | None = None
    mean: np.ndarray | None = None
    mode: str = RAW
    source_mode: str | None = None

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        n = values.shape[0]
        if self.trend is None:
            object.__setattr__(self, "trend", np.zeros((n, 2)))
        if self.scale is None:
            object.__setattr__(self, "scale", np.ones(n))
        if self.mean is None:
            object.__setattr__(self, "mean", values.mean(axis=1))

    @property
    def n(self):
        return self.values.shape[0]

    def __len__(self):
        return self.values.shape[1]

    @property
    def center_time(self):
        return self.t0 + 0.5 * (len(self) - 1) * self.dt

    @property
    def is_finite(self):
        return bool(np.all(np.isfinite(self.values)))


@dataclass(frozen=True)
class Increments:
    """``dx[:, j] = values[:, j + 1] - values[:, j]`` with left endpoints as base points."""

    dx: np.ndarray
    base_points: np.ndarray
    dt: float


def partition(ts, window_len, stride=None, min_points=None):
    """Split ``ts`` into windows of ``window_len`` time units every ``stride``.

    Start indices are ``0, s, 2s, ...`` with ``s = round(stride / dt)``; a
    trailing partial window is dropped. ``stride=None`` gives non-overlapping
    windows.
    """
    values = np.asarray(ts.values, dtype=float)
    n, N = values.shape
    W = int(round(window_len / ts.dt))
    s = W if stride is None else int(round(stride / ts.dt))
    floor = 10 * n if min_points is None else int(min_points)
    if W < max(floor, 2):
        raise SeriesTooShortError(f"window of {W} points is below the floor of {floor}")
    if s < 1:
        raise SeriesTooShortError("stride must be at least one sample")
    if N < W:
        raise SeriesTooShortError(f"series of {N} points is shorter than one window ({W})")
    return [
        Window(ts.dt, start, values[:, start : start + W], t0=ts.t0 + start * ts.dt)
        for start in range(0, N - W + 1, s)
    ]


def detrend_linear(w, retain_mean=False):
    """Remove the per-dimension least-squares line.

    With ``retain_mean`` the window mean is added back, so only the slope is
    removed; this is the input for drift/diffusion estimation. Otherwise the
    result fluctuates around zero, which is what variance and AC(1) use.
    """
    if w.mode == NORMALIZED:
        raise WindowModeError("detrend before normalising")
    x = w.values
    tau = w.dt * np.arange(len(w))
    tau_c = tau - tau.mean()
    mean = x.mean(axis=1, keepdims=True)
    slope = ((x - mean) @ tau_c) / (tau_c @ tau_c)
    resid = x - mean - slope[:, None] * tau_c
    intercept = mean[:, 0] - slope * tau.mean()
    trend = w.trend + np.column_stack([slope, intercept])
    if retain_mean:
        return replace(w, values=resid + mean, trend=trend, mean=mean[:, 0], mode=MEAN_RETAINED)
    return replace(w, values=resid, trend=trend, mean=mean[:, 0], mode=CENTERED)


def normalize_unit_std(w):
    """Divide each dimension by its sample standard deviation (ddof=1)."""
    std = w.values.std(axis=1, ddof=1)
    if not np.all(std > 0):
        bad = np.flatnonzero(~(std > 0)).tolist()
        raise DegenerateDimensionError(f"degenerate dimension: zero standard deviation in {bad}")
    return replace(
        w, values=w.values / std[:, None], scale=w.scale * std, mode=NORMALIZED, source_mode=w.mode
    )


def denormalize(w):
    """Undo :func:`normalize_unit_std`; the returned window has unit scale."""
    if w.mode != NORMALIZED:
        raise WindowModeError("window is not normalised")
    return replace(
        w, values=w.values * w.scale[:, None], scale=np.ones(w.n), mode=w.source_mode or RAW, source_mode=None
    )


def increments(w):
    if len(w) < 2:
        raise SeriesTooShortError("increments need at least 2 samples")
    x = w.values
    return Increments(np.diff(x, axis=1), x[:, :-1], w.dt)
