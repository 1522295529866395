"""Exception hierarchy shared by every mrilab module."""


class MRILabError(Exception):
    """Base class for all mrilab errors."""


class ConfigurationError(MRILabError, ValueError):
    """A parameter or configuration value is invalid or infeasible."""


class InvalidInputError(MRILabError, ValueError):
    """An input array has the wrong shape, range or contains non-finite values."""


class TrainingError(MRILabError, RuntimeError):
    """An optimisation run diverged (NaN/Inf loss)."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class TensorIOError(MRILabError, OSError):
    """A tensor or checkpoint file is missing, malformed or inconsistent."""
