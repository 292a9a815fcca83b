"""Exception hierarchy shared by every module."""


class SpinBridgeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SpinBridgeError, ValueError):
    """An input failed a structural or numerical precondition."""


class SizingError(ValidationError):
    """A dimension is too small or the total dimension too large."""


class RangeError(ValidationError):
    """A discrete parameter lies outside the supported range."""


class TruncationError(SpinBridgeError):
    """A truncated Fock space discards more weight than allowed."""


class ConvergenceError(SpinBridgeError):
    """An iterative scheme did not reach its tolerance.

    The best residual estimate reached is kept on ``residual``.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class ModelError(SpinBridgeError):
    """The physical model does not satisfy an assumption of the routine."""


class MeasurementError(SpinBridgeError):
    """A measurement branch has vanishing probability."""


class SamplingError(SpinBridgeError):
    """A time grid does not cover the requested window densely enough."""


class ConfigError(SpinBridgeError, ValueError):
    """A run configuration is malformed."""


class AlignmentError(SpinBridgeError):
    """Two result sets cannot be compared point by point."""
