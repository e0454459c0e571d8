"""Kernel (Nadaraya-Watson) estimates of the first two Kramers-Moyal coefficients.

For grid points ``x_i`` the drift and diffusion estimates are

    A(x_i)    = sum_t K(X_t - x_i) dX_t       / (dt sum_t K(X_t - x_i))
    BB^T(x_i) = sum_t K(X_t - x_i) dX_t dX_t^T / (dt sum_t K(X_t - x_i))

with the Epanechnikov kernel ``K(u) = 3/(4h) (1 - |u|^2/h^2)`` on ``|u| < h``.
Increments are conditioned on their left endpoint.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateDimensionError,
    InsufficientCoverageError,
    InvalidStateError,
    SubgridTooSparseError,
)


@dataclass(frozen=True)
class Grid:
    """``M`` evenly spaced centres per dimension spanning ``[mins, maxs]``.

    Points are enumerated in row-major order over the per-dimension indices.
    """

    mins: np.ndarray
    maxs: np.ndarray
    M: int

    @property
    def n(self):
        return len(self.mins)

    @property
    def shape(self):
        return (self.M,) * self.n

    @property
    def size(self):
        return self.M**self.n

    @property
    def spacing(self):
        return (self.maxs - self.mins) / (self.M - 1)

    @property
    def axes(self):
        return [np.linspace(lo, hi, self.M) for lo, hi in zip(self.mins, self.maxs)]

    def coordinates(self, multi_index):
        """Coordinates for an ``(n, k)`` array of per-dimension indices."""
        multi_index = np.asarray(multi_index)
        return self.mins[:, None] + multi_index * self.spacing[:, None]

    def point(self, i):
        return self.coordinates(np.array(np.unravel_index(i, self.shape))[:, None])[:, 0]

    @property
    def points(self):
        """All grid points, shape ``(M**n, n)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def nearest_index(self, x):
        """Per-dimension index of the grid point whose cell contains ``x``."""
        rel = (np.asarray(x, dtype=float) - self.mins) / self.spacing
        return np.clip(np.rint(rel).astype(int), 0, self.M - 1)


def build_grid(values, M=50):
    """Grid on the bounding box of ``values`` (shape ``(n, W)`` or a Window)."""
    values = np.atleast_2d(getattr(values, "values", values))
    if M < 2:
        raise ValueError("M must be at least 2")
    mins, maxs = values.min(axis=1), values.max(axis=1)
    if not np.all(maxs > mins):
        raise DegenerateDimensionError("degenerate dimension: data has zero extent")
    return Grid(mins, maxs, int(M))


def default_bandwidth(n, M):
    """Bandwidth ``14 n / M`` in units of the (unit-variance) data."""
    return 14.0 * n / M


def epanechnikov(dist, h):
    dist = np.asarray(dist, dtype=float)
    return np.where(dist < h, 0.75 / h * (1.0 - (dist / h) ** 2), 0.0)


def kernel_weight(x, center, h):
    """Epanechnikov weight of ``x`` relative to ``center`` (Euclidean norm)."""
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    d = np.linalg.norm(np.atleast_1d(np.asarray(x, float) - np.asarray(center, float)))
    return float(epanechnikov(d, h))


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidth and the weight mass a grid point needs to count as valid.

    ``None`` fields resolve to ``14 n / M`` and to the weight of five samples
    at half a bandwidth from the grid point.
    """

    bandwidth: float | None = None
    min_weight_mass: float | None = None

    def resolve(self, n, M):
        h = default_bandwidth(n, M) if self.bandwidth is None else float(self.bandwidth)
        if not h > 0:
            raise ValueError("bandwidth must be positive")
        mass = self.min_weight_mass
        if mass is None:
            mass = 5.0 * float(epanechnikov(0.5 * h, h))
        return h, float(mass)


@dataclass(frozen=True)
class EstimatedField:
    """Drift and diffusion estimates on a grid.

    Estimates live in the units of the data they were computed from (usually
    normalised); ``scale`` maps them back: coordinates and drift component
    ``j`` scale by ``s_j``, diffusion entry ``(j, k)`` by ``s_j s_k``.
    Invalid points carry NaN.
    """

    grid: Grid
    drift: np.ndarray
    diffusion: np.ndarray
    weight_mass: np.ndarray
    valid: np.ndarray
    dt: float
    bandwidth: float
    scale: np.ndarray | None = None

    def __post_init__(self):
        if self.scale is None:
            object.__setattr__(self, "scale", np.ones(self.grid.n))

    @property
    def points(self):
        return self.grid.points

    def physical_points(self):
        return self.grid.points * self.scale

    def physical_drift(self):
        return self.drift * self.scale

    def physical_diffusion(self):
        return self.diffusion * np.outer(self.scale, self.scale)

    def csv_header(self):
        n = self.grid.n
        cols = ["index"] + [f"x{j + 1}" for j in range(n)] + [f"drift_{j + 1}" for j in range(n)]
        cols += [f"diff_{j + 1}{k + 1}" for j in range(n) for k in range(j, n)]
        return cols + ["weight_mass", "valid"]

    def csv_rows(self):
        """Rows in physical units, one per grid point."""
        n = self.grid.n
        pts, drift, diff = self.physical_points(), self.physical_drift(), self.physical_diffusion()
        upper = [(j, k) for j in range(n) for k in range(j, n)]
        for i in range(self.grid.size):
            row = [i, *pts[i], *drift[i], *(diff[i, j, k] for j, k in upper)]
            yield row + [self.weight_mass[i], int(self.valid[i])]


def _accumulate(base, dx, grid, h, second=True):
    """Kernel-weighted sums over samples for every grid point.

    Each sample only reaches grid points within ``h``, so instead of the full
    ``M**n x T`` weight matrix we visit the box of candidate neighbours around
    its nearest grid point.
    """
    n, T = base.shape
    G = grid.size
    sp = grid.spacing
    h2 = h * h
    norm = 0.75 / h
    i0 = np.rint((base - grid.mins[:, None]) / sp[:, None]).astype(np.int64)
    reach = [int(math.ceil(h / s + 0.5)) for s in sp]
    mass = np.zeros(G)
    first = np.zeros((G, n))
    pairs = [(j, k) for j in range(n) for k in range(j, n)] if second else []
    sec = np.zeros((G, n, n))
    for off in itertools.product(*[range(-r, r + 1) for r in reach]):
        idx = i0 + np.asarray(off, dtype=np.int64)[:, None]
        inside = np.all((idx >= 0) & (idx < grid.M), axis=0)
        d2 = ((base - grid.coordinates(idx)) ** 2).sum(axis=0)
        sel = np.flatnonzero(inside & (d2 < h2))
        if sel.size == 0:
            continue
        w = norm * (1.0 - d2[sel] / h2)
        flat = np.ravel_multi_index(tuple(idx[:, sel]), grid.shape)
        mass += np.bincount(flat, w, minlength=G)
        dxs = dx[:, sel]
        for j in range(n):
            first[:, j] += np.bincount(flat, w * dxs[j], minlength=G)
        for j, k in pairs:
            sec[:, j, k] += np.bincount(flat, w * dxs[j] * dxs[k], minlength=G)
    for j, k in pairs:
        sec[:, k, j] = sec[:, j, k]
    return mass, first, sec


def _check_increments(inc):
    if inc.base_points.shape != inc.dx.shape:
        raise InvalidStateError("increments and base points must have the same shape")
    if not (np.all(np.isfinite(inc.base_points)) and np.all(np.isfinite(inc.dx))):
        raise InvalidStateError("invalid state: non-finite increments")


def estimate_field(inc, grid, kernel=KernelConfig(), scale=None):
    """Drift and diffusion estimates on every grid point in one pass."""
    _check_increments(inc)
    h, min_mass = kernel.resolve(grid.n, grid.M)
    mass, first, sec = _accumulate(inc.base_points, inc.dx, grid, h)
    valid = mass >= min_mass
    if not valid.any():
        raise InsufficientCoverageError("insufficient data coverage: no valid grid point")
    with np.errstate(invalid="ignore", divide="ignore"):
        drift = first / (mass[:, None] * inc.dt)
        diffusion = sec / (mass[:, None, None] * inc.dt)
    drift[~valid] = np.nan
    diffusion[~valid] = np.nan
    return EstimatedField(grid, drift, diffusion, mass, valid, inc.dt, h, scale)


def estimate_drift(inc, grid, kernel=KernelConfig()):
    """Per-point drift vectors (NaN where invalid) and the weight mass."""
    _check_increments(inc)
    h, min_mass = kernel.resolve(grid.n, grid.M)
    mass, first, _ = _accumulate(inc.base_points, inc.dx, grid, h, second=False)
    valid = mass >= min_mass
    if not valid.any():
        raise InsufficientCoverageError("insufficient data coverage: no valid grid point")
    with np.errstate(invalid="ignore", divide="ignore"):
        drift = first / (mass[:, None] * inc.dt)
    drift[~valid] = np.nan
    return drift, mass


def estimate_diffusion(inc, grid, kernel=KernelConfig()):
    """Per-point symmetric diffusion matrices (NaN where invalid) and the weight mass."""
    field = estimate_field(inc, grid, kernel)
    return field.diffusion, field.weight_mass


def nadaraya_watson(base, dx, dt, query, h, chunk=2048):
    """Drift estimate at arbitrary query points ``(q, n)``; NaN without support."""
    base = np.atleast_2d(base)
    query = np.atleast_2d(query)
    out = np.full((query.shape[0], base.shape[0]), np.nan)
    for lo in range(0, query.shape[0], chunk):
        q = query[lo : lo + chunk]
        d = np.sqrt(((q[:, :, None] - base[None, :, :]) ** 2).sum(axis=1))
        w = epanechnikov(d, h)
        tot = w.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[lo : lo + chunk] = (w @ dx.T) / (tot[:, None] * dt)
    return out


@dataclass(frozen=True)
class Subgrid:
    """Valid grid points of the central sub-hypercube and their drift estimates."""

    indices: np.ndarray
    points: np.ndarray
    drift: np.ndarray
    bounds: np.ndarray


def subgrid_count(M, m):
    return int(math.ceil(m * M - 1e-9))


def central_subgrid(grid, field, x_star_hat, m=0.5):
    """Keep ``ceil(m M)`` consecutive indices per dimension around ``x_star_hat``.

    The block is centred on the grid point containing ``x_star_hat`` and
    shifted inward where it would cross the grid boundary.
    """
    if not 0 < m <= 1:
        raise ValueError("m must lie in (0, 1]")
    x_star_hat = np.atleast_1d(np.asarray(x_star_hat, dtype=float))
    if np.any(x_star_hat < grid.mins) or np.any(x_star_hat > grid.maxs):
        raise InvalidStateError("estimated equilibrium lies outside the grid")
    count = subgrid_count(grid.M, m)
    centre = grid.nearest_index(x_star_hat)
    lo = np.clip(centre - (count - 1) // 2, 0, grid.M - count)
    bounds = np.column_stack([lo, lo + count])
    ranges = [np.arange(a, b) for a, b in bounds]
    mesh = np.meshgrid(*ranges, indexing="ij")
    flat = np.ravel_multi_index(tuple(g.ravel() for g in mesh), grid.shape)
    flat = flat[field.valid[flat]]
    if flat.size < grid.n + 2:
        raise SubgridTooSparseError(
            f"subgrid too sparse: {flat.size} valid points, need {grid.n + 2}"
        )
    return Subgrid(flat, grid.points[flat], field.drift[flat], bounds)
