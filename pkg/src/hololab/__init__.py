"""Numerical laboratory for Riemannian holonomy."""

__version__ = "0.1.0"
