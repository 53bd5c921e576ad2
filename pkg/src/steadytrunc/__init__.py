"""Aggregation-guided truncations for stationary distributions of Markov population models."""
from .kernels import BACKEND as KERNEL_BACKEND
from .model import ReactionNetwork, propensity
from .parser import format_model, load_model, parse_model

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "ReactionNetwork",
    "__version__",
    "format_model",
    "load_model",
    "parse_model",
    "propensity",
]
