"""Surrogate models of chaotic flows via random delay-coordinate features."""

from ngrc._kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
