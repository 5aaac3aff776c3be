"""Exception types raised across the package."""


class HetNetError(Exception):
    """Base class for all errors raised by :mod:`hetnet_game`."""


class NotPositiveDefinite(HetNetError, ValueError):
    pass


class SingularCovariance(HetNetError, ValueError):
    """An interference or received-signal covariance is not positive definite."""


class SingularReceivedCovariance(SingularCovariance):
    pass


class SingularInterferenceCovariance(SingularCovariance):
    pass


class DegenerateRegularizer(HetNetError, ValueError):
    """``A + mu*I`` cannot be factored because ``mu == 0`` and ``A`` is singular."""


class NoPositiveGain(HetNetError):
    """Every effective channel gain is zero; the zero covariance is optimal."""


class BracketFailure(HetNetError, RuntimeError):
    pass


class InfeasibleDirection(HetNetError, ValueError):
    pass


class InvalidPlacement(HetNetError, ValueError):
    pass


class ConfigError(HetNetError, ValueError):
    pass


class TooLarge(HetNetError, ValueError):
    pass


class MaxSweepsExceeded(HetNetError, RuntimeError):
    """The best-response loop hit ``max_sweeps`` before converging.

    The partially converged state and the trace collected so far are kept on
    the exception so callers can still inspect or report them.
    """

    def __init__(self, message, state=None, trace=None):
        super().__init__(message)
        self.state = state
        self.trace = trace
