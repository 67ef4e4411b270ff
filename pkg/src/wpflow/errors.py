"""Exception hierarchy."""


class WPFError(Exception):
    """Base class for all solver errors."""


class GridMismatch(WPFError, ValueError):
    pass


class ConfigError(WPFError, ValueError):
    pass


class NonZeroMean(WPFError, ValueError):
    pass


class NoConvergence(WPFError):
    pass


class InfeasibleBeta(WPFError, ValueError):
    pass


class ZeroDirection(WPFError, ValueError):
    pass


class DegenerateDirection(WPFError):
    """The chemical potential is (numerically) constant: the mean and area
    constraint gradients are linearly dependent."""


class TrustRegionViolation(WPFError):
    """A point handed to the retraction is too far from the manifold."""


class LineSearchStall(WPFError):
    pass


class InfeasibleInitial(WPFError, ValueError):
    pass


class StepFailure(WPFError):
    def __init__(self, step, cause):
        super().__init__(f"step {step} failed: {cause!r}")
        self.step = step
        self.cause = cause


class MarginCollapse(WPFError):
    """Raised when ``||mu - mean(mu)||`` falls below the configured floor.

    The partial trajectory is available as ``.trajectory``.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
