"""Numerical laboratory for classical and quantum statistical experiments."""

__version__ = "0.1.0"
