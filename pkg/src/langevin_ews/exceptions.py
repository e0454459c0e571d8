"""Error types. Each carries a short ``category`` used as the CLI error code."""


class LangevinEWSError(Exception):
    category = "error"


class InvalidStateError(LangevinEWSError, ValueError):
    category = "invalid_state"


class NoEquilibriumError(LangevinEWSError):
    category = "no_equilibrium"


class BlowUpError(LangevinEWSError):
    category = "blow_up"

    def __init__(self, t):
        self.t = float(t)
        super().__init__(f"blow-up at t={self.t:g}")


class SeriesTooShortError(LangevinEWSError, ValueError):
    category = "series_too_short"


class WindowModeError(LangevinEWSError, ValueError):
    category = "window_mode"


class DegenerateDimensionError(LangevinEWSError):
    category = "degenerate_dimension"


class InsufficientCoverageError(LangevinEWSError):
    category = "insufficient_coverage"


class SubgridTooSparseError(LangevinEWSError):
    category = "subgrid_too_sparse"


class DegenerateGeometryError(LangevinEWSError):
    category = "degenerate_geometry"


class UnstableLinearizationError(LangevinEWSError, ValueError):
    category = "unstable_linearization"


class PastBifurcationError(LangevinEWSError, ValueError):
    category = "past_bifurcation"


class EnsembleUnreliableError(LangevinEWSError):
    category = "ensemble_unreliable"


class TooFewSamplesError(LangevinEWSError, ValueError):
    category = "too_few_samples"


class ConfigError(LangevinEWSError, ValueError):
    category = "config"
