"""Spectral toolkit for magnetic Schrödinger operators on the square and honeycomb lattices."""

from .operator import SIGN_CONVENTION

__version__ = "0.1.0"

__all__ = ["SIGN_CONVENTION", "__version__"]
