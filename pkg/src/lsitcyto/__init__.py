"""Lens-free shadow-image cytometry: synthetic data, denoising, classification and evaluation."""

from ._accel import backend

__version__ = "0.1.0"

__all__ = ["backend", "__version__"]
