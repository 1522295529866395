"""Simulated under-sampled MRI with INR-guided diffusion posterior sampling."""

from .errors import ConfigurationError, InvalidInputError, MRILabError, TensorIOError, TrainingError
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "InvalidInputError",
    "KERNEL_BACKEND",
    "MRILabError",
    "TensorIOError",
    "TrainingError",
]
