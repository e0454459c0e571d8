import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from langevin_ews.exceptions import DegenerateDimensionError, SeriesTooShortError, WindowModeError
from langevin_ews.models import TimeSeries
from langevin_ews.preprocess import (
    CENTERED,
    MEAN_RETAINED,
    NORMALIZED,
    RAW,
    Window,
    denormalize,
    detrend_linear,
    increments,
    normalize_unit_std,
    partition,
)


def _ts(N, n=1, dt=0.02, seed=0):
    return TimeSeries(0.0, dt, np.random.default_rng(seed).normal(size=(n, N)))


def test_partition_window_counts():
    ws = partition(_ts(50001, n=2), 100.0)
    assert len(ws) == 10
    assert all(len(w) == 5000 for w in ws)
    assert [w.start_index for w in ws[:3]] == [0, 5000, 10000]
    assert ws[1].t0 == pytest.approx(100.0)


def test_partition_stride_and_trailing_window_dropped():
    ws = partition(_ts(1001, dt=0.1), 20.0, stride=5.0)
    starts = [w.start_index for w in ws]
    assert starts == list(range(0, 1001 - 200 + 1, 50))
    assert len(partition(_ts(1050, dt=0.1), 20.0)) == 5


def test_partition_errors():
    with pytest.raises(SeriesTooShortError):
        partition(_ts(100, n=2, dt=0.1), 1.5)  # 15 points < 10 n
    with pytest.raises(SeriesTooShortError):
        partition(_ts(100, dt=0.1), 20.0)


def test_detrend_removes_exact_line():
    t = 0.1 * np.arange(300)
    x = np.vstack([2.0 + 0.3 * t, -1.0 - 0.05 * t])
    w = Window(0.1, 0, x)
    c = detrend_linear(w)
    np.testing.assert_allclose(c.values, 0.0, atol=1e-12)
    assert c.mode == CENTERED
    np.testing.assert_allclose(c.trend[:, 0], [0.3, -0.05])
    np.testing.assert_allclose(c.trend[:, 1], [2.0, -1.0])
    k = detrend_linear(w, retain_mean=True)
    assert k.mode == MEAN_RETAINED
    np.testing.assert_allclose(k.values, x.mean(axis=1, keepdims=True) * np.ones_like(x))


@given(arrays(np.float64, (2, 40), elements=st.floats(-100, 100)), st.floats(-5, 5), st.floats(-5, 5))
def test_detrend_ignores_added_lines(x, slope, offset):
    t = 0.5 * np.arange(40)
    a = detrend_linear(Window(0.5, 0, x)).values
    b = detrend_linear(Window(0.5, 0, x + offset + slope * t)).values
    np.testing.assert_allclose(a, b, atol=1e-8 * (1 + np.abs(x).max() + abs(slope) * 20 + abs(offset)))
    np.testing.assert_allclose(a.mean(axis=1), 0.0, atol=1e-9 * (1 + np.abs(x).max()))


def test_normalize_and_denormalize():
    x = np.random.default_rng(1).normal(3.0, [[2.0], [0.5]], size=(2, 500))
    w = detrend_linear(Window(0.1, 0, x), retain_mean=True)
    z = normalize_unit_std(w)
    assert z.mode == NORMALIZED
    np.testing.assert_allclose(z.values.std(axis=1, ddof=1), 1.0)
    back = denormalize(z)
    assert back.mode == MEAN_RETAINED
    np.testing.assert_allclose(back.values, w.values)
    with pytest.raises(WindowModeError):
        detrend_linear(z)
    with pytest.raises(WindowModeError):
        denormalize(w)


def test_normalize_degenerate_dimension():
    x = np.vstack([np.arange(20.0), np.full(20, 4.0)])
    with pytest.raises(DegenerateDimensionError):
        normalize_unit_std(Window(1.0, 0, x))


def test_window_metadata_and_increments():
    w = Window(0.5, 4, [[0.0, 1.0, 3.0, 6.0]], t0=2.0)
    assert w.mode == RAW and w.center_time == pytest.approx(2.75)
    inc = increments(w)
    np.testing.assert_array_equal(inc.dx, [[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(inc.base_points, [[0.0, 1.0, 3.0]])
    with pytest.raises(SeriesTooShortError):
        increments(Window(0.5, 0, [[1.0]]))
