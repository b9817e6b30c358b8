"""Exception hierarchy shared across the package."""


class MirrorModeError(Exception):
    """Base class for all numerical/physics failures raised by this package."""


class ConfigError(MirrorModeError):
    """Invalid configuration, units, or schema violation."""


class TruncationError(MirrorModeError):
    """Fock-space truncation too small for the requested operation."""


class ConvergenceError(MirrorModeError):
    """Iterative solver failed to reach its tolerance.

    Carries the best estimate so far in ``best`` when available.
    """

    def __init__(self, message, best=None, gradient_norm=None):
        super().__init__(message)
        self.best = best
        self.gradient_norm = gradient_norm


class DegenerateError(MirrorModeError):
    """Parameter combination makes the requested expression singular."""


class RankError(MirrorModeError):
    """Liouvillian kernel is not one-dimensional (degenerate parameters)."""


class NoSolutionError(MirrorModeError):
    """No real solution exists (e.g. mismatch too severe for r = 0)."""


class IntegratorError(MirrorModeError):
    """Master-equation integration violated trace or positivity bounds."""


class IllConditionedError(MirrorModeError):
    """Noise moments statistically indistinguishable at the required order."""


class WindowError(MirrorModeError):
    """Correlation window too short: the correlation has not decayed."""


class UnresolvedError(MirrorModeError):
    """Spectral fit cannot constrain the Rabi frequency (no sideband structure)."""


class BudgetExhausted(MirrorModeError):
    """Optimization budget used up; carries best-so-far in ``best``."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
