"""Numerical toolkit for uniform isometry and generalization bounds of shallow ReLU networks
under standard Gaussian inputs."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CardinalityCapError,
    ConvergenceError,
    DomainError,
    InvalidInputError,
    UnconfiguredConstantError,
    UnsupportedReductionError,
)
from .relu_model import NetworkParams, NeuronParams, ParameterClass  # noqa: E402
from .quadrature import QuadratureSpec  # noqa: E402

__all__ = [
    "__version__",
    "CardinalityCapError",
    "ConvergenceError",
    "DomainError",
    "InvalidInputError",
    "UnconfiguredConstantError",
    "UnsupportedReductionError",
    "NetworkParams",
    "NeuronParams",
    "ParameterClass",
    "QuadratureSpec",
]
