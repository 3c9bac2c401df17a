"""Limiting eigenvalues and fluctuation laws of polynomial models in Haar unitaries."""

__version__ = "0.1.0"
