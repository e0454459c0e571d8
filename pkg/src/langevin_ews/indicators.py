"""Variance and lag-1 autocorrelation, plus their linearised reference values."""

import math

import numpy as np

from .exceptions import (
    DegenerateDimensionError,
    PastBifurcationError,
    SeriesTooShortError,
    UnstableLinearizationError,
    WindowModeError,
)
from .preprocess import CENTERED


def _require_centered(w):
    if w.mode != CENTERED:
        raise WindowModeError(f"indicators need a detrended-centered window, got {w.mode!r}")


def variance(w):
    """Per-dimension sample variance (N - 1 denominator)."""
    _require_centered(w)
    return w.values.var(axis=1, ddof=1)


def ac1(w):
    """Per-dimension lag-1 autocorrelation.

    Sum of products over the W - 1 overlapping pairs divided by the sum of
    squares of the full window, which keeps the value inside [-1, 1].
    """
    _require_centered(w)
    x = w.values
    if x.shape[1] < 3:
        raise SeriesTooShortError("AC(1) needs at least 3 samples")
    ss = np.einsum("ij,ij->i", x, x)
    if not np.all(ss > 0):
        raise DegenerateDimensionError("degenerate dimension: zero variance")
    lagged = np.einsum("ij,ij->i", x[:, :-1], x[:, 1:])
    return np.clip(lagged / ss, -1.0, 1.0)


def ou_reference(lam, sigma, dt):
    """Stationary ``(variance, AC(1))`` of ``dX = -lam X dt + sigma dW`` sampled at ``dt``."""
    if not lam > 0:
        raise UnstableLinearizationError(f"unstable linearization: lambda={lam:g} <= 0")
    return sigma * sigma / (2.0 * lam), math.exp(-lam * dt)


def fold_reference(alpha, sigma, dt):
    """Linearised fold values, i.e. :func:`ou_reference` with ``lam = 2 sqrt(alpha)``."""
    if not alpha > 0:
        raise PastBifurcationError(f"past bifurcation: alpha={alpha:g} <= 0")
    return ou_reference(2.0 * math.sqrt(alpha), sigma, dt)
