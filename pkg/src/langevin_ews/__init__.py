"""Early-warning indicators for stochastic dynamical systems.

Restoring rates are estimated from the eigenvalues of a locally fitted drift
Jacobian, with variance and lag-1 autocorrelation as conventional baselines.
"""

__version__ = "0.1.0"

from .exceptions import LangevinEWSError  # noqa: E402
from .models import ModelSpec, Ramp, TimeSeries, integrate, integrate_ensemble  # noqa: E402
from .pipeline import (  # noqa: E402
    AnalysisConfig,
    SimulationConfig,
    analyze,
    detection_grid,
    ensemble,
    separation_test,
)
from .stability import StabilityConfig, lambda_for_window  # noqa: E402

__all__ = [
    "AnalysisConfig",
    "LangevinEWSError",
    "ModelSpec",
    "Ramp",
    "SimulationConfig",
    "StabilityConfig",
    "TimeSeries",
    "analyze",
    "detection_grid",
    "ensemble",
    "integrate",
    "integrate_ensemble",
    "lambda_for_window",
    "separation_test",
]
