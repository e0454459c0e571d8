import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from langevin_ews.exceptions import (
    DegenerateDimensionError,
    PastBifurcationError,
    UnstableLinearizationError,
    WindowModeError,
)
from langevin_ews.indicators import ac1, fold_reference, ou_reference, variance
from langevin_ews.preprocess import Window, detrend_linear


def _centred(x, dt=0.1):
    return detrend_linear(Window(dt, 0, np.atleast_2d(x)))


def test_variance_uses_unbiased_denominator():
    x = np.array([[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]])
    w = Window(1.0, 0, x - x.mean(), mode="detrended-centered")
    assert variance(w)[0] == pytest.approx(6 / 5)


def test_indicators_require_centred_window():
    w = Window(1.0, 0, np.random.default_rng(0).normal(size=(1, 50)))
    with pytest.raises(WindowModeError):
        variance(w)
    with pytest.raises(WindowModeError):
        ac1(detrend_linear(w, retain_mean=True))


@given(arrays(np.float64, (1, 30), elements=st.floats(-1e3, 1e3)))
def test_ac1_bounded(x):
    w = _centred(x)
    if not np.all(np.abs(w.values).max() > 1e-9 * (1 + np.abs(x).max())):
        return
    r = ac1(w)
    assert -1.0 <= r[0] <= 1.0


def test_ac1_degenerate():
    with pytest.raises(DegenerateDimensionError):
        ac1(Window(1.0, 0, np.zeros((1, 10)), mode="detrended-centered"))


def test_ac1_of_long_ar1_matches_coefficient():
    rng = np.random.default_rng(7)
    phi, N = 0.9, 200_000
    x = np.empty(N)
    x[0] = 0.0
    z = rng.normal(size=N)
    for i in range(1, N):
        x[i] = phi * x[i - 1] + z[i]
    assert ac1(_centred(x))[0] == pytest.approx(phi, abs=0.005)


def test_reference_values():
    var, r = ou_reference(1.0, 1.0, 0.1)
    assert var == pytest.approx(0.5) and r == pytest.approx(math.exp(-0.1))
    var, r = fold_reference(0.25, 0.2, 0.1)
    assert var == pytest.approx(0.04 / 2.0) and r == pytest.approx(math.exp(-0.1))
    with pytest.raises(UnstableLinearizationError):
        ou_reference(0.0, 1.0, 0.1)
    with pytest.raises(PastBifurcationError):
        fold_reference(-0.1, 1.0, 0.1)


def test_detrended_variance_of_ar1_matches_exact_expectation():
    # E[s^2] of the detrended window is trace(P Sigma) / (W - 1) with P the
    # residual projector of the line fit and Sigma the AR(1) covariance.
    phi, W = math.exp(-0.1), 200
    idx = np.arange(W)
    Sigma = 0.5 * phi ** np.abs(idx[:, None] - idx[None, :])
    X = np.column_stack([np.ones(W), idx])
    P = np.eye(W) - X @ np.linalg.solve(X.T @ X, X.T)
    expected = np.trace(P @ Sigma) / (W - 1)
    rng = np.random.default_rng(3)
    L = np.linalg.cholesky(Sigma)
    samples = [variance(_centred(L @ rng.normal(size=W)))[0] for _ in range(3000)]
    assert np.mean(samples) == pytest.approx(expected, rel=0.02)
