"""Nonlinear transformation of complex amplitudes by quantum singular value transformation."""

__version__ = "0.1.0"
