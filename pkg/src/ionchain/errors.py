"""Exception types raised by the ionchain library."""


class IonChainError(Exception):
    """Base class for all ionchain failures."""


class ConfigError(IonChainError):
    """A run configuration failed schema validation."""


class ConvergenceError(IonChainError):
    """An iterative solver ran out of budget.

    Carries the last residual norm so callers can judge how far off the
    iteration stopped.
    """

    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


class DegenerateModesError(IonChainError):
    """Two mode eigenvalues are numerically indistinguishable."""


class NyquistError(IonChainError):
    """Requested sample rate cannot resolve the fastest mode."""


class HarmonicRegimeError(IonChainError):
    """Displacements grew too large for the small-oscillation expansion."""


class IonCrossingError(IonChainError):
    """Ion ordering was violated during nonlinear integration."""


class ResolutionError(IonChainError):
    """Two mode frequencies are closer than the spectral resolution."""

    def __init__(self, mode_a, mode_b, gap, resolution):
        super().__init__(
            f"modes {mode_a} and {mode_b} are separated by {gap:.3e} rad/s, "
            f"below the resolution limit {resolution:.3e} rad/s"
        )
        self.mode_a = mode_a
        self.mode_b = mode_b
        self.gap = gap
        self.resolution = resolution


class DurationError(IonChainError):
    """Record is too short for the requested spectral analysis."""


class NoMotionError(IonChainError):
    """The analyzed signal carries no oscillation to work with."""


class NoUsableModesError(IonChainError):
    """No measured mode couples to the ion under study."""
