"""Simulation and numerical checks for stationary and self-similar SaS random fields."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    ConservativeRegimeError,
    InsufficientDataError,
    NumericalError,
    ParameterError,
    StableFieldsError,
)
from .kernels import KernelSpec, ModelTag  # noqa: E402
from .stable_core import RngStream  # noqa: E402

__all__ = [
    "__version__",
    "KernelSpec",
    "ModelTag",
    "RngStream",
    "StableFieldsError",
    "ParameterError",
    "ConfigurationError",
    "NumericalError",
    "InsufficientDataError",
    "ConservativeRegimeError",
]
