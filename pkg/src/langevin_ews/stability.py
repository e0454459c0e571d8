"""Local Jacobian fit and eigenvalue-based stability indicators.

For one window: detrend (keeping the mean), normalise, estimate the drift on
an ``M**n`` grid, keep the central sub-hypercube around the sample mean, fit
``A(x) ~ c + J x`` by ordinary least squares and take ``-Re`` of the
eigenvalues of ``J`` as the restoring rates.
"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np

from .exceptions import DegenerateGeometryError, LangevinEWSError, SubgridTooSparseError
from .kramers_moyal import KernelConfig, build_grid, central_subgrid, estimate_field
from .preprocess import detrend_linear, increments, normalize_unit_std

INV_SQRT2 = 2.0**-0.5


@dataclass(frozen=True)
class StabilityConfig:
    M: int = 50
    m: float = 0.5
    bandwidth: float | None = None
    min_weight_mass: float | None = None
    oscillation_tol: float = 1e-8
    alignment_threshold: float = INV_SQRT2

    @property
    def kernel(self):
        return KernelConfig(self.bandwidth, self.min_weight_mass)


@dataclass(frozen=True)
class AxisAssignment:
    permutation: np.ndarray
    scores: np.ndarray
    low_alignment: bool


@dataclass
class StabilityEstimate:
    """Fitted local Jacobian (physical units, 1/time) and its spectrum.

    ``eigenvalues`` are sorted by descending real part, so ``lambdas[0]`` is
    the least stable restoring rate.
    """

    jacobian: np.ndarray
    intercept: np.ndarray
    eigenvalues: np.ndarray
    lambdas: np.ndarray
    oscillatory: np.ndarray
    eigenvectors: np.ndarray
    axes: AxisAssignment | None = None
    x_star: np.ndarray | None = None
    field: object = None
    subgrid: object = None
    condition_number: float = float("nan")
    center_time: float = float("nan")
    extra: dict = dc_field(default_factory=dict)

    def to_record(self):
        rec = {
            "time": float(self.center_time),
            "lambda": self.lambdas.tolist(),
            "eigenvalues_real": self.eigenvalues.real.tolist(),
            "eigenvalues_imag": self.eigenvalues.imag.tolist(),
            "oscillatory": [bool(o) for o in self.oscillatory],
            "jacobian": self.jacobian.tolist(),
            "intercept": self.intercept.tolist(),
            "condition_number": float(self.condition_number),
        }
        if self.axes is not None:
            rec["axis_assignment"] = self.axes.permutation.tolist()
            rec["alignment_scores"] = self.axes.scores.tolist()
            rec["low_alignment"] = bool(self.axes.low_alignment)
        if self.subgrid is not None:
            rec["subgrid_points"] = int(len(self.subgrid.indices))
        return rec


def estimate_equilibrium(w):
    """Sample mean of the (mean-retained) window."""
    return w.values.mean(axis=1)


def fit_jacobian(points, drift, scales=None):
    """OLS fit of ``drift ~ c + J points`` with an intercept column.

    ``points`` and ``drift`` have shape ``(k, n)``. With ``scales`` the fit is
    taken to be in coordinates divided by ``scales`` and is mapped back:
    ``J[j, k] *= s_j / s_k`` and ``c[j] *= s_j``.

    Returns ``(intercept, jacobian, condition_number)``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    drift = np.atleast_2d(np.asarray(drift, dtype=float))
    k, n = points.shape
    if k < n + 2:
        raise SubgridTooSparseError(f"subgrid too sparse: {k} points for a {n}-dimensional fit")
    X = np.column_stack([np.ones(k), points])
    coef, _, rank, sv = np.linalg.lstsq(X, drift, rcond=None)
    if rank < n + 1:
        raise DegenerateGeometryError("degenerate subgrid geometry: design matrix is rank deficient")
    intercept = coef[0]
    J = coef[1:].T
    if scales is not None:
        s = np.asarray(scales, dtype=float)
        J = J * np.outer(s, 1.0 / s)
        intercept = intercept * s
    return intercept, J, float(sv[0] / sv[-1])


def eigen_analysis(jacobian, tol=1e-8):
    """Eigenvalues sorted least-stable first, ``lambda = -Re``, oscillation flags."""
    J = np.atleast_2d(np.asarray(jacobian, dtype=float))
    vals, vecs = np.linalg.eig(J)
    order = np.lexsort((-vals.imag, -vals.real))
    vals, vecs = vals[order], vecs[:, order]
    scale = np.linalg.norm(J, 2)
    oscillatory = np.abs(vals.imag) > tol * max(scale, np.finfo(float).tiny)
    return vals, -vals.real, oscillatory, vecs


def assign_axes(eigenvectors, threshold=INV_SQRT2):
    """Greedy matching of eigenvectors (columns) to coordinate axes.

    The largest remaining ``|component|`` of the unit eigenvectors fixes one
    eigenvalue-axis pair at a time; ties go to the lower index. Returns the
    axis for each eigenvalue, the matched ``|component|`` scores and whether
    any score falls to ``threshold`` or below.
    """
    V = np.atleast_2d(np.asarray(eigenvectors))
    V = V / np.linalg.norm(V, axis=0, keepdims=True)
    S = np.abs(V).T  # rows: eigenvalues, columns: axes
    n = S.shape[0]
    perm = np.full(n, -1)
    scores = np.zeros(n)
    free_rows, free_cols = set(range(n)), set(range(n))
    for _ in range(n):
        best = None
        for r in sorted(free_rows):
            for c in sorted(free_cols):
                if best is None or S[r, c] > S[best]:
                    best = (r, c)
        r, c = best
        perm[r] = c
        scores[r] = S[r, c]
        free_rows.discard(r)
        free_cols.discard(c)
    low = bool(np.any(scores <= threshold * (1.0 + 1e-9)))
    return AxisAssignment(perm, scores, low)


def lambda_for_window(w, config=StabilityConfig()):
    """Full per-window estimation from a raw window."""
    try:
        kept = detrend_linear(w, retain_mean=True)
        normed = normalize_unit_std(kept)
        inc = increments(normed)
        grid = build_grid(normed, config.M)
        fld = estimate_field(inc, grid, config.kernel, scale=normed.scale)
        x_star = estimate_equilibrium(normed)
        sub = central_subgrid(grid, fld, x_star, config.m)
        intercept, J, cond = fit_jacobian(sub.points, sub.drift, normed.scale)
    except LangevinEWSError as exc:
        exc.window_time = w.center_time
        exc.args = (f"{exc} (window centred at t={w.center_time:g})",)
        raise
    vals, lams, osc, vecs = eigen_analysis(J, config.oscillation_tol)
    return StabilityEstimate(
        jacobian=J,
        intercept=intercept,
        eigenvalues=vals,
        lambdas=lams,
        oscillatory=osc,
        eigenvectors=vecs,
        axes=assign_axes(vecs, config.alignment_threshold),
        x_star=x_star * normed.scale,
        field=fld,
        subgrid=sub,
        condition_number=cond,
        center_time=w.center_time,
    )
