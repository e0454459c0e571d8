"""scikit-learn style wrappers around the functional estimators.

Inputs follow the ``(n_samples, n_dims)`` convention: rows are equally
spaced samples in time, columns are state variables.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .kramers_moyal import KernelConfig, build_grid, estimate_field, nadaraya_watson
from .pipeline import AnalysisConfig, analyze_values
from .preprocess import Window, detrend_linear, increments, normalize_unit_std
from .stability import StabilityConfig, lambda_for_window
from .validation import check_points, check_positive, check_series


class KramersMoyalRegressor(BaseEstimator):
    """Kernel estimate of the drift (first Kramers-Moyal coefficient).

    Parameters
    ----------
    dt : float
        Sampling interval.
    M : int
        Grid points per dimension.
    bandwidth : float, optional
        Kernel bandwidth in units of the normalised data; defaults to ``14 n / M``.
    min_weight_mass : float, optional
        Weight mass a grid point needs to be valid.
    detrend : bool
        Remove a linear trend (keeping the mean) before estimating.

    Attributes
    ----------
    field_ : EstimatedField
        Drift and diffusion on the grid.
    scale_ : ndarray
        Per-dimension standard deviations the data were divided by.
    """

    def __init__(self, dt=1.0, M=50, bandwidth=None, min_weight_mass=None, detrend=True):
        self.dt = dt
        self.M = M
        self.bandwidth = bandwidth
        self.min_weight_mass = min_weight_mass
        self.detrend = detrend

    def fit(self, X, y=None):
        values = check_series(X)
        w = Window(check_positive(self.dt, "dt"), 0, values)
        if self.detrend:
            w = detrend_linear(w, retain_mean=True)
        normed = normalize_unit_std(w)
        inc = increments(normed)
        grid = build_grid(normed, self.M)
        kernel = KernelConfig(self.bandwidth, self.min_weight_mass)
        self.field_ = estimate_field(inc, grid, kernel, scale=normed.scale)
        self.scale_ = normed.scale
        self.n_features_in_ = values.shape[0]
        self._increments = inc
        return self

    def predict(self, X):
        """Drift at arbitrary points (physical units); NaN where no sample is within reach."""
        check_is_fitted(self, "field_")
        q = check_points(X, self.n_features_in_) / self.scale_
        inc = self._increments
        drift = nadaraya_watson(inc.base_points, inc.dx, inc.dt, q, self.field_.bandwidth)
        return drift * self.scale_


class LangevinStabilityEstimator(BaseEstimator):
    """Local drift Jacobian and restoring rates of a single window.

    Attributes
    ----------
    jacobian_, intercept_ : ndarray
        Fitted ``A(x) ~ intercept_ + jacobian_ @ x`` in physical units.
    eigenvalues_ : ndarray
        Sorted by descending real part.
    lambdas_ : ndarray
        ``-Re(eigenvalues_)``.
    oscillatory_ : ndarray of bool
    x_star_ : ndarray
        Estimated equilibrium.
    estimate_ : StabilityEstimate
    """

    def __init__(self, dt=1.0, M=50, m=0.5, bandwidth=None, min_weight_mass=None):
        self.dt = dt
        self.M = M
        self.m = m
        self.bandwidth = bandwidth
        self.min_weight_mass = min_weight_mass

    def fit(self, X, y=None):
        values = check_series(X)
        w = Window(check_positive(self.dt, "dt"), 0, values)
        cfg = StabilityConfig(self.M, self.m, self.bandwidth, self.min_weight_mass)
        est = lambda_for_window(w, cfg)
        self.estimate_ = est
        self.jacobian_ = est.jacobian
        self.intercept_ = est.intercept
        self.eigenvalues_ = est.eigenvalues
        self.lambdas_ = est.lambdas
        self.oscillatory_ = est.oscillatory
        self.x_star_ = est.x_star
        self.n_features_in_ = values.shape[0]
        return self

    def predict(self, X):
        """Linearised drift ``intercept_ + jacobian_ @ x`` for each row."""
        check_is_fitted(self, "jacobian_")
        X = check_points(X, self.n_features_in_)
        return self.intercept_ + X @ self.jacobian_.T


class WindowedIndicatorTransformer(TransformerMixin, BaseEstimator):
    """Sliding-window variance, AC(1), restoring rates and noise amplitude.

    ``transform`` returns one row per window with columns ``time``, then
    ``n`` each of variance, AC(1), lambda and diffusion amplitude.
    """

    def __init__(self, dt=1.0, window_len=100.0, stride=None, M=50, m=0.5, bandwidth=None,
                 min_weight_mass=None):
        self.dt = dt
        self.window_len = window_len
        self.stride = stride
        self.M = M
        self.m = m
        self.bandwidth = bandwidth
        self.min_weight_mass = min_weight_mass

    def _config(self):
        return AnalysisConfig(window_len=self.window_len, stride=self.stride, M=self.M,
                              m=self.m, bandwidth=self.bandwidth,
                              min_weight_mass=self.min_weight_mass)

    def fit(self, X, y=None):
        values = check_series(X)
        self.series_ = analyze_values(values, 0.0, check_positive(self.dt, "dt"), self._config())
        self.n_features_in_ = values.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "series_")
        values = check_series(X)
        if values.shape[0] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {values.shape[0]}")
        return analyze_values(values, 0.0, self.dt, self._config()).to_array()

    def get_feature_names_out(self, input_features=None):
        n = self.n_features_in_
        names = ["time"]
        for prefix in ("var", "ac1", "lambda", "diff"):
            names += [f"{prefix}_{j + 1}" for j in range(n)]
        return np.array(names, dtype=object)
