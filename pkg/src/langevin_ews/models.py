"""Synthetic SDE models with time-dependent parameters.

Five variants are available, all of the Langevin form
``dX = A(X, t) dt + B(X, t) dW`` with independent standard Wiener components:

``Fold``
    ``dX = (-X**2 + alpha(t)) dt + sigma(t) dW``.
``OU1D``
    ``dX = -lam X dt + sigma dW``.
``OU2D``
    ``dX = O diag(-lam1, -lam2) O^T X dt + [[sigma1, c], [0, sigma2]] dW`` with
    ``O`` the rotation by ``angle`` degrees (``angle=45`` mixes both axes).
``PredatorPrey``
    Plankton model with turbulence forcing ``turb(t)`` and multiplicative noise.
``Hopf``
    Subcritical Hopf normal form with additive isotropic noise ``eps``.

Every parameter is stored as a :class:`Ramp`; constants are degenerate ramps.
State arrays follow the convention ``x[..., n]`` so that drift and noise can be
evaluated for a whole ensemble at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.linalg import solve_continuous_lyapunov
from scipy.optimize import brentq

from .exceptions import BlowUpError, ConfigError, InvalidStateError, NoEquilibriumError


@dataclass(frozen=True)
class Ramp:
    """Linear ramp between two values, clamped outside ``[t_start, t_end]``."""

    start_value: float
    end_value: float
    t_start: float = 0.0
    t_end: float = 0.0

    @classmethod
    def constant(cls, value):
        return cls(float(value), float(value), 0.0, 0.0)

    @property
    def is_constant(self):
        return self.start_value == self.end_value

    def __call__(self, t):
        if self.is_constant or t <= self.t_start:
            return self.start_value
        if t >= self.t_end:
            return self.end_value
        frac = (t - self.t_start) / (self.t_end - self.t_start)
        return self.start_value + frac * (self.end_value - self.start_value)

    def to_config(self):
        if self.is_constant:
            return self.start_value
        return {
            "start": self.start_value,
            "end": self.end_value,
            "t_start": self.t_start,
            "t_end": self.t_end,
        }

    @classmethod
    def from_config(cls, value, name="parameter"):
        if isinstance(value, Ramp):
            return value
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return cls.constant(value)
        if isinstance(value, Mapping):
            unknown = set(value) - {"start", "end", "t_start", "t_end"}
            if unknown:
                raise ConfigError(f"unknown ramp keys for {name}: {sorted(unknown)}")
            try:
                ramp = cls(
                    float(value["start"]),
                    float(value["end"]),
                    float(value.get("t_start", 0.0)),
                    float(value.get("t_end", 0.0)),
                )
            except KeyError as exc:
                raise ConfigError(f"ramp {name} is missing {exc.args[0]!r}") from None
            if not ramp.is_constant and ramp.t_end <= ramp.t_start:
                raise ConfigError(f"ramp {name} needs t_end > t_start")
            return ramp
        raise ConfigError(f"cannot interpret {value!r} as a value or ramp for {name}")


# Default parameters of the plankton predator-prey model.
PREDATOR_PREY_DEFAULTS = {
    "r": 1.0,
    "a": 1.0 / 9.0,
    "m": 0.0525,
    "xi": 0.7,
    "h0": 1.0 / 16.0,
    "c_h": 0.88,
    "K0": 0.7,
    "c_K": 0.66,
    "sigma_P": 0.037,
    "sigma_Z": 0.01,
}

_PARAMETERS = {
    "Fold": ("alpha", "sigma"),
    "OU1D": ("lam", "sigma"),
    "OU2D": ("lam1", "lam2", "sigma1", "sigma2", "c", "angle"),
    "PredatorPrey": tuple(PREDATOR_PREY_DEFAULTS) + ("turb",),
    "Hopf": ("mu", "omega", "eps"),
}
_DIMENSION = {"Fold": 1, "OU1D": 1, "OU2D": 2, "PredatorPrey": 2, "Hopf": 2}
_NOISE_PARAMETERS = {
    "Fold": ("sigma",),
    "OU1D": ("sigma",),
    "OU2D": ("sigma1", "sigma2"),
    "PredatorPrey": ("sigma_P", "sigma_Z"),
    "Hopf": ("eps",),
}
_DEFAULTS = {
    "Fold": {
        "alpha": Ramp(1.0, 0.0, 0.0, 1000.0),
        "sigma": Ramp(0.2, 0.06, 0.0, 1000.0),
    },
    "OU1D": {"lam": 1.0, "sigma": 1.0},
    "OU2D": {"lam1": 1.0, "lam2": 1.0, "sigma1": 1.0, "sigma2": 1.0, "c": 0.0, "angle": 0.0},
    "PredatorPrey": dict(PREDATOR_PREY_DEFAULTS, turb=Ramp(1.0, 0.3, 0.0, 1000.0)),
    "Hopf": {"mu": Ramp(2.0, 0.1, 0.0, 1000.0), "omega": 1.0, "eps": 0.01},
}

# Below this fraction of the carrying capacity the largest stable prey state is
# the collapsed (low-density) branch rather than the populated one.
_POPULATED_MIN_FRACTION = 0.25


def canonical_variant(name):
    lookup = {v.lower(): v for v in _PARAMETERS}
    lookup.update({"predator_prey": "PredatorPrey", "predator-prey": "PredatorPrey"})
    try:
        return lookup[str(name).lower()]
    except KeyError:
        raise ConfigError(f"unknown model variant {name!r}; expected one of {sorted(_PARAMETERS)}") from None


@dataclass(frozen=True)
class ModelSpec:
    """A model variant plus its (possibly time-dependent) parameters.

    Missing parameters take the variant defaults, so ``ModelSpec("Fold")`` is
    the fold ramp scenario and ``ModelSpec("PredatorPrey")`` the plankton defaults.
    """

    variant: str
    params: Mapping[str, Ramp] = field(default_factory=dict)

    def __post_init__(self):
        variant = canonical_variant(self.variant)
        object.__setattr__(self, "variant", variant)
        allowed = _PARAMETERS[variant]
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise ConfigError(f"unknown parameters for {variant}: {sorted(unknown)}")
        merged = {}
        for name in allowed:
            value = self.params.get(name, _DEFAULTS[variant][name])
            merged[name] = Ramp.from_config(value, name)
        for name in _NOISE_PARAMETERS[variant]:
            ramp = merged[name]
            if ramp.start_value < 0 or ramp.end_value < 0:
                raise ConfigError(f"noise amplitude {name} must be >= 0")
        object.__setattr__(self, "params", merged)

    @classmethod
    def create(cls, variant, **params):
        return cls(variant, params)

    @property
    def dim(self):
        return _DIMENSION[self.variant]

    def at(self, t):
        """Parameter values at time ``t`` as plain floats."""
        return {name: ramp(t) for name, ramp in self.params.items()}

    def with_params(self, **params):
        merged = dict(self.params)
        merged.update({k: Ramp.from_config(v, k) for k, v in params.items()})
        return ModelSpec(self.variant, merged)

    def without_noise(self):
        return self.with_params(**{name: 0.0 for name in _NOISE_PARAMETERS[self.variant]})

    def to_config(self):
        return {
            "variant": self.variant,
            "parameters": {k: v.to_config() for k, v in self.params.items()},
        }

    @classmethod
    def from_config(cls, cfg):
        if not isinstance(cfg, Mapping):
            raise ConfigError("model configuration must be a mapping")
        unknown = set(cfg) - {"variant", "parameters"}
        if unknown:
            raise ConfigError(f"unknown model keys: {sorted(unknown)}")
        if "variant" not in cfg:
            raise ConfigError("model configuration needs a 'variant'")
        params = cfg.get("parameters") or {}
        if not isinstance(params, Mapping):
            raise ConfigError("'parameters' must be a mapping")
        return cls(cfg["variant"], dict(params))


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled trajectory; ``values`` has one row per dimension."""

    t0: float
    dt: float
    values: np.ndarray
    model_tag: str | None = None

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[1] < 2:
            raise InvalidStateError("a time series needs at least 2 samples")
        if not self.dt > 0:
            raise InvalidStateError("dt must be positive")
        if not np.all(np.isfinite(values)):
            raise InvalidStateError("time series values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self):
        return self.values.shape[0]

    def __len__(self):
        return self.values.shape[1]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self))


# ---------------------------------------------------------------------------
# Drift, noise and Jacobians. ``p`` is the dict returned by ``ModelSpec.at``.


def _rotation(angle_deg):
    th = math.radians(angle_deg)
    return np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])


def _ou2d_matrix(p):
    rot = _rotation(p["angle"])
    return rot @ np.diag([-p["lam1"], -p["lam2"]]) @ rot.T


def _pp_functions(p):
    K = p["K0"] + p["c_K"] * p["turb"]
    h = p["h0"] / (1.0 + p["c_h"] * p["turb"])
    return K, h


def _drift(variant, p, x):
    if variant == "Fold":
        return -x * x + p["alpha"]
    if variant == "OU1D":
        return -p["lam"] * x
    if variant == "OU2D":
        A = _ou2d_matrix(p)
        x0, x1 = x[..., 0], x[..., 1]
        return np.stack([A[0, 0] * x0 + A[0, 1] * x1, A[1, 0] * x0 + A[1, 1] * x1], axis=-1)
    if variant == "PredatorPrey":
        K, h = _pp_functions(p)
        P, Z = x[..., 0], x[..., 1]
        P2 = P * P
        grazing = p["a"] * P2 / (h * h + P2) * Z
        dP = (p["r"] * P * (1.0 - P / K) - grazing) / p["xi"]
        dZ = grazing - p["m"] * Z * Z
        return np.stack([dP, dZ], axis=-1)
    if variant == "Hopf":
        x0, x1 = x[..., 0], x[..., 1]
        damp = p["mu"] - (x0 * x0 + x1 * x1)
        return np.stack([-damp * x0 - p["omega"] * x1, -damp * x1 + p["omega"] * x0], axis=-1)
    raise ConfigError(variant)


def _noise(variant, p, x, dw):
    """``B(x) @ dw`` evaluated row-wise; ``dw`` has the same shape as ``x``."""
    if variant in ("Fold", "OU1D"):
        return p["sigma"] * dw
    if variant == "OU2D":
        return np.stack(
            [p["sigma1"] * dw[..., 0] + p["c"] * dw[..., 1], p["sigma2"] * dw[..., 1]], axis=-1
        )
    if variant == "PredatorPrey":
        return np.stack(
            [
                p["sigma_P"] / math.sqrt(p["xi"]) * x[..., 0] * dw[..., 0],
                p["sigma_Z"] * x[..., 1] * dw[..., 1],
            ],
            axis=-1,
        )
    if variant == "Hopf":
        return p["eps"] * dw
    raise ConfigError(variant)


def _diffusion(variant, p, x):
    shape = x.shape[:-1]
    n = x.shape[-1]
    B = np.zeros(shape + (n, n))
    if variant in ("Fold", "OU1D"):
        B[..., 0, 0] = p["sigma"]
    elif variant == "OU2D":
        B[..., 0, 0] = p["sigma1"]
        B[..., 0, 1] = p["c"]
        B[..., 1, 1] = p["sigma2"]
    elif variant == "PredatorPrey":
        B[..., 0, 0] = p["sigma_P"] / math.sqrt(p["xi"]) * x[..., 0]
        B[..., 1, 1] = p["sigma_Z"] * x[..., 1]
    elif variant == "Hopf":
        B[..., 0, 0] = p["eps"]
        B[..., 1, 1] = p["eps"]
    return B


def _jacobian(variant, p, x):
    shape = x.shape[:-1]
    n = x.shape[-1]
    J = np.zeros(shape + (n, n))
    if variant == "Fold":
        J[..., 0, 0] = -2.0 * x[..., 0]
    elif variant == "OU1D":
        J[..., 0, 0] = -p["lam"]
    elif variant == "OU2D":
        J[...] = _ou2d_matrix(p)
    elif variant == "PredatorPrey":
        K, h = _pp_functions(p)
        P, Z = x[..., 0], x[..., 1]
        denom = h * h + P * P
        g = p["a"] * P * P / denom
        dg = 2.0 * p["a"] * P * h * h / (denom * denom)
        J[..., 0, 0] = (p["r"] * (1.0 - 2.0 * P / K) - dg * Z) / p["xi"]
        J[..., 0, 1] = -g / p["xi"]
        J[..., 1, 0] = dg * Z
        J[..., 1, 1] = g - 2.0 * p["m"] * Z
    elif variant == "Hopf":
        x0, x1 = x[..., 0], x[..., 1]
        damp = p["mu"] - (x0 * x0 + x1 * x1)
        J[..., 0, 0] = -damp + 2.0 * x0 * x0
        J[..., 0, 1] = 2.0 * x0 * x1 - p["omega"]
        J[..., 1, 0] = 2.0 * x0 * x1 + p["omega"]
        J[..., 1, 1] = -damp + 2.0 * x1 * x1
    return J


def _as_state(model, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != model.dim:
        raise InvalidStateError(f"expected state of dimension {model.dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidStateError("invalid state: non-finite entries")
    return x


def drift_eval(model, x, t):
    """Deterministic drift ``A(x, t)``; ``x`` may be a single state or a stack."""
    x = _as_state(model, x)
    return _drift(model.variant, model.at(t), x)


def diffusion_eval(model, x, t):
    """Noise matrix ``B(x, t)`` (not ``B B^T``)."""
    x = _as_state(model, x)
    return _diffusion(model.variant, model.at(t), x)


def jacobian_analytic(model, x, t):
    x = _as_state(model, x)
    return _jacobian(model.variant, model.at(t), x)


def _predator_prey_equilibria(p):
    """All interior equilibria (P, Z) with Z > 0, sorted by P."""
    K, h = _pp_functions(p)
    a, m, r = p["a"], p["m"], p["r"]

    # Z from the predator nullcline substituted into the prey nullcline.
    def reduced(P):
        return r * (1.0 - P / K) - a * a * P**3 / (m * (h * h + P * P) ** 2)

    grid = np.linspace(K * 1e-6, K, 4001)
    vals = reduced(grid)
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0):
        if vals[i] == 0.0:
            roots.append(grid[i])
        elif vals[i + 1] != 0.0:
            roots.append(brentq(reduced, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    out = []
    for P in roots:
        Z = a * P * P / (m * (h * h + P * P))
        x = np.array([P, Z])
        # Newton polish on the full 2D system.
        for _ in range(5):
            F = _drift("PredatorPrey", p, x)
            if np.max(np.abs(F)) < 1e-15:
                break
            x = x - np.linalg.solve(_jacobian("PredatorPrey", p, x), F)
        out.append(x)
    return out, K


def equilibrium(model, t):
    """The occupied stable equilibrium at time ``t``."""
    p = model.at(t)
    v = model.variant
    if v == "Fold":
        if p["alpha"] <= 0:
            raise NoEquilibriumError(f"no equilibrium: alpha={p['alpha']:g} <= 0 at t={t:g}")
        return np.array([math.sqrt(p["alpha"])])
    if v == "OU1D":
        if p["lam"] <= 0:
            raise NoEquilibriumError(f"no equilibrium: lam={p['lam']:g} <= 0 at t={t:g}")
        return np.zeros(1)
    if v == "OU2D":
        if min(p["lam1"], p["lam2"]) <= 0:
            raise NoEquilibriumError(f"no stable equilibrium at t={t:g}")
        return np.zeros(2)
    if v == "Hopf":
        if p["mu"] <= 0:
            raise NoEquilibriumError(f"no stable equilibrium: mu={p['mu']:g} <= 0 at t={t:g}")
        return np.zeros(2)
    roots, K = _predator_prey_equilibria(p)
    stable = [x for x in roots if np.all(np.linalg.eigvals(_jacobian(v, p, x)).real < 0)]
    if not stable or stable[-1][0] < _POPULATED_MIN_FRACTION * K:
        raise NoEquilibriumError(f"no equilibrium: populated branch has vanished at turb={p['turb']:g}")
    return stable[-1]


def stationary_covariance(model, t):
    """Covariance of the linearisation around ``equilibrium(model, t)``."""
    xs = equilibrium(model, t)
    J = jacobian_analytic(model, xs, t)
    B = diffusion_eval(model, xs, t)
    return solve_continuous_lyapunov(J, -B @ B.T)


def _covariance_sqrt(C):
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    return V * np.sqrt(np.clip(w, 0.0, None))


@dataclass
class EnsembleTrajectories:
    """Output of :func:`integrate_ensemble`.

    ``values`` has shape ``(members, n, samples)``; samples after a member's
    blow-up are NaN and ``blowup_time`` holds the time (NaN if none).
    """

    t0: float
    dt: float
    values: np.ndarray
    seeds: list
    blowup_time: np.ndarray
    model_tag: str | None = None

    def member(self, i, truncate=True):
        vals = self.values[i]
        if truncate and np.isfinite(self.blowup_time[i]):
            good = np.all(np.isfinite(vals), axis=0)
            stop = np.argmin(good) if not good.all() else vals.shape[1]
            vals = vals[:, :stop]
        return TimeSeries(self.t0, self.dt, vals, self.model_tag)


_NOISE_BUDGET = 1 << 21  # normal draws held in memory at once


def integrate_ensemble(
    model,
    seeds,
    t0,
    t_end,
    dt_sim,
    sample_every=10,
    x0=None,
    bound=1e6,
    on_blowup="raise",
):
    """Euler-Maruyama integration of one trajectory per seed, vectorised.

    Each member draws its initial perturbation and then its Wiener increments
    from ``numpy.random.default_rng(seed)``, so a member's path does not depend
    on which other members are integrated alongside it.

    ``on_blowup`` is ``"raise"`` (raise :class:`BlowUpError`) or ``"truncate"``
    (mark samples from the blow-up onwards as NaN).
    """
    if not dt_sim > 0:
        raise ConfigError("dt_sim must be positive")
    if int(sample_every) != sample_every or sample_every < 1:
        raise ConfigError("sample_every must be a positive integer")
    if not t_end > t0:
        raise ConfigError("t_end must exceed t0")
    if on_blowup not in ("raise", "truncate"):
        raise ConfigError("on_blowup must be 'raise' or 'truncate'")
    sample_every = int(sample_every)
    seeds = list(seeds)
    N, n = len(seeds), model.dim
    rngs = [np.random.default_rng(s) for s in seeds]

    if x0 is None:
        start = equilibrium(model, t0)
        root = _covariance_sqrt(stationary_covariance(model, t0))
        x = np.stack([start + root @ rng.standard_normal(n) for rng in rngs])
    else:
        x = np.broadcast_to(_as_state(model, x0), (N, n)).astype(float)

    n_steps = int(round((t_end - t0) / dt_sim))
    n_samples = n_steps // sample_every + 1
    out = np.empty((N, n, n_samples))
    out[:, :, 0] = x
    blowup = np.full(N, np.nan)
    alive = np.ones(N, dtype=bool)
    safe = x.copy()
    sqdt = math.sqrt(dt_sim)
    variant = model.variant
    chunk = max(1, min(n_steps, _NOISE_BUDGET // max(1, N * n)))

    for first in range(0, n_steps, chunk):
        k = min(chunk, n_steps - first)
        noise = np.stack([rng.standard_normal((k, n)) for rng in rngs], axis=1)
        for i in range(k):
            step = first + i
            t = t0 + step * dt_sim
            p = model.at(t)
            x = x + _drift(variant, p, x) * dt_sim + _noise(variant, p, x, noise[i] * sqdt)
            if not np.abs(x).max() <= bound:
                over = ~(np.abs(x).max(axis=1) <= bound)
                newly = over & alive
                t_bad = t + dt_sim
                if on_blowup == "raise" and newly.any():
                    raise BlowUpError(t_bad)
                blowup[newly] = t_bad
                alive &= ~newly
                # dead members continue from a harmless state; masked below
                x[over] = safe[over]
            if (step + 1) % sample_every == 0:
                out[:, :, (step + 1) // sample_every] = x

    dt = dt_sim * sample_every
    times = t0 + dt * np.arange(n_samples)
    for j in np.flatnonzero(~alive):
        out[j, :, times >= blowup[j] - 0.5 * dt_sim] = np.nan
    return EnsembleTrajectories(t0, dt, out, seeds, blowup, model.variant)


def integrate(
    model,
    x0,
    t0,
    t_end,
    dt_sim,
    sample_every=10,
    seed=0,
    bound=1e6,
    on_blowup="raise",
):
    """Single Euler-Maruyama trajectory sampled every ``sample_every`` steps.

    ``x0=None`` starts at the equilibrium plus a draw from its linearised
    stationary distribution. With ``on_blowup="truncate"`` the series stops
    at the last sample before the blow-up.
    """
    ens = integrate_ensemble(
        model, [seed], t0, t_end, dt_sim, sample_every, x0=x0, bound=bound, on_blowup=on_blowup
    )
    return ens.member(0)
