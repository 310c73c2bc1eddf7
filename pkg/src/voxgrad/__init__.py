"""Gradient attribution and weight pruning for small 3D classifiers."""

from voxgrad.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
