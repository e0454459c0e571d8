import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.signal import lfilter

from langevin_ews.exceptions import (
    DegenerateDimensionError,
    InsufficientCoverageError,
    InvalidStateError,
    SubgridTooSparseError,
)
from langevin_ews.kramers_moyal import (
    KernelConfig,
    _accumulate,
    build_grid,
    central_subgrid,
    default_bandwidth,
    epanechnikov,
    estimate_drift,
    estimate_field,
    kernel_weight,
    nadaraya_watson,
    subgrid_count,
)
from langevin_ews.preprocess import Increments


def _dense(base, dx, grid, h):
    """Brute force over every (grid point, sample) pair."""
    pts = grid.points
    d = np.sqrt(((pts[:, :, None] - base[None, :, :]) ** 2).sum(axis=1))
    w = np.where(d < h, 0.75 / h * (1 - (d / h) ** 2), 0.0)
    mass = w.sum(axis=1)
    first = w @ dx.T
    sec = np.einsum("gt,jt,kt->gjk", w, dx, dx)
    return mass, first, sec


@given(
    st.integers(1, 2), st.integers(2, 9), st.floats(0.05, 3.0), st.integers(0, 10_000)
)
def test_accumulate_matches_brute_force(n, M, h, seed):
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(n, 60))
    dx = rng.normal(size=(n, 60))
    grid = build_grid(base, M)
    got = _accumulate(base, dx, grid, h)
    ref = _dense(base, dx, grid, h)
    for a, b in zip(got, ref):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_epanechnikov_support_and_peak():
    h = 0.56
    assert kernel_weight([0.0, 0.0], [0.0, 0.0], h) == pytest.approx(3 / (4 * h))
    assert kernel_weight([h, 0.0], [0.0, 0.0], h) == 0.0
    assert kernel_weight([0.4, 0.4], [0.0, 0.0], h) == 0.0
    d = np.linspace(0, 2 * h, 101)
    k = epanechnikov(d, h)
    assert np.all(k[d >= h] == 0) and np.all(k[d < h] > 0)
    assert np.all(np.diff(k[d < h]) < 0)
    with pytest.raises(ValueError):
        kernel_weight(0.0, 0.0, 0.0)


def test_kernel_config_defaults():
    h, mass = KernelConfig().resolve(2, 50)
    assert h == pytest.approx(0.56) == default_bandwidth(2, 50)
    assert mass == pytest.approx(5 * 0.75 / h * 0.75)
    assert KernelConfig(0.3, 1.0).resolve(1, 50) == (0.3, 1.0)


def test_subgrid_count():
    assert subgrid_count(50, 0.5) == 25
    assert subgrid_count(4, 0.5) == 2
    assert subgrid_count(7, 0.5) == 4


def test_build_grid_and_errors():
    g = build_grid(np.array([[0.0, 1.0, 2.0], [5.0, 4.0, 3.0]]), 2)
    np.testing.assert_allclose(g.points, [[0, 3], [0, 5], [2, 3], [2, 5]])
    with pytest.raises(DegenerateDimensionError):
        build_grid(np.ones((1, 10)))
    with pytest.raises(ValueError):
        build_grid(np.arange(5.0), 1)


def _ou_increments(lam=1.0, N=20000, dt=0.1, n=1, seed=0):
    """Exact OU transitions (an AR(1) recursion) started from the stationary law."""
    rng = np.random.default_rng(seed)
    a = np.exp(-lam * dt)
    s = np.sqrt((1 - a * a) / (2 * lam))
    z = s * rng.normal(size=(n, N))
    z[:, 0] = rng.normal(scale=np.sqrt(0.5 / lam), size=n)
    x = lfilter([1.0], [1.0, -a], z, axis=1)
    return Increments(np.diff(x, axis=1), x[:, :-1], dt)


def test_diffusion_is_symmetric_with_nonnegative_diagonal():
    inc = _ou_increments(n=2, N=5000)
    grid = build_grid(inc.base_points, 20)
    f = estimate_field(inc, grid)
    D = f.diffusion[f.valid]
    np.testing.assert_array_equal(D, np.swapaxes(D, 1, 2))
    assert np.all(np.diagonal(D, axis1=1, axis2=2) >= 0)
    assert np.all(np.isnan(f.drift[~f.valid]))


def test_ou_drift_and_diffusion_near_equilibrium():
    lam, dt = 1.0, 0.1
    inc = _ou_increments(lam, 1_000_000, dt)
    grid = build_grid(inc.base_points, 50)
    f = estimate_field(inc, grid, KernelConfig(0.2))
    near = f.valid & (np.abs(grid.points[:, 0]) < 0.5)
    x = grid.points[near, 0]
    slope = np.polyfit(x, f.drift[near, 0], 1)[0]
    # conditional mean of an exact OU step: (e^{-lam dt} - 1) / dt
    assert slope == pytest.approx((np.exp(-lam * dt) - 1) / dt, rel=0.05)
    # second moment of an exact OU step near x = 0: (1 - e^{-2 lam dt}) / (2 lam dt)
    target = (1 - np.exp(-2 * lam * dt)) / (2 * lam * dt)
    assert np.median(f.diffusion[near, 0, 0]) == pytest.approx(target, rel=0.03)


def test_estimate_drift_matches_field_and_nadaraya_watson():
    inc = _ou_increments(N=3000)
    grid = build_grid(inc.base_points, 15)
    f = estimate_field(inc, grid)
    drift, mass = estimate_drift(inc, grid)
    np.testing.assert_allclose(drift, f.drift, equal_nan=True)
    np.testing.assert_allclose(mass, f.weight_mass)
    nw = nadaraya_watson(inc.base_points, inc.dx, inc.dt, grid.points, f.bandwidth)
    np.testing.assert_allclose(nw[f.valid], f.drift[f.valid], rtol=1e-10)


def test_coverage_and_input_errors():
    inc = _ou_increments(N=50)
    grid = build_grid(inc.base_points, 50)
    with pytest.raises(InsufficientCoverageError):
        estimate_field(inc, grid, KernelConfig(min_weight_mass=1e9))
    bad = Increments(np.array([[np.nan, 1.0]]), np.array([[0.0, 1.0]]), 0.1)
    with pytest.raises(InvalidStateError):
        estimate_field(bad, build_grid(np.array([[0.0, 1.0]]), 4))


def test_central_subgrid_placement():
    inc = _ou_increments(N=20000)
    grid = build_grid(inc.base_points, 50)
    f = estimate_field(inc, grid)
    sub = central_subgrid(grid, f, np.array([0.0]), 0.5)
    assert sub.bounds[0, 1] - sub.bounds[0, 0] == 25
    centre = grid.nearest_index([0.0])[0]
    assert sub.bounds[0, 0] <= centre < sub.bounds[0, 1]
    edge = central_subgrid(grid, f, grid.maxs, 0.5)
    assert tuple(edge.bounds[0]) == (25, 50)
    with pytest.raises(InvalidStateError):
        central_subgrid(grid, f, grid.maxs + 1.0, 0.5)
    with pytest.raises(SubgridTooSparseError):
        central_subgrid(grid, f, np.array([0.0]), 0.02)


def test_field_csv_rows_use_physical_units():
    inc = _ou_increments(N=2000)
    grid = build_grid(inc.base_points, 6)
    f = estimate_field(inc, grid, scale=np.array([2.0]))
    header = f.csv_header()
    assert header == ["index", "x1", "drift_1", "diff_11", "weight_mass", "valid"]
    rows = list(f.csv_rows())
    assert len(rows) == 6
    assert rows[0][1] == pytest.approx(2 * grid.mins[0])
    i = int(np.flatnonzero(f.valid)[0])
    assert rows[i][3] == pytest.approx(4 * f.diffusion[i, 0, 0])
