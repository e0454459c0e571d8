"""Input checks shared by the estimator wrappers."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigError, InvalidStateError


def check_series(X, min_samples=2):
    """Validate a ``(n_samples, n_dims)`` series; 1-D input becomes one column.

    Returns the array transposed to ``(n_dims, n_samples)``, the layout the
    functional modules use.
    """
    X = np.asarray(X)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    try:
        X = check_array(X, dtype=np.float64, ensure_min_samples=min_samples)
    except ValueError as exc:
        raise InvalidStateError(f"invalid state: {exc}") from None
    return np.ascontiguousarray(X.T)


def check_points(X, n_dims):
    """Validate query points against the fitted dimension."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if n_dims == 1 else X.reshape(1, -1)
    try:
        X = check_array(X, dtype=np.float64)
    except ValueError as exc:
        raise InvalidStateError(f"invalid state: {exc}") from None
    if X.shape[1] != n_dims:
        raise InvalidStateError(f"expected {n_dims} columns, got {X.shape[1]}")
    return X


def check_positive(value, name):
    if not (np.isscalar(value) and np.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)
