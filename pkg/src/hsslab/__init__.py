"""Numerical toolkit for Hermitian symmetric spaces realized as adjoint orbits."""

__version__ = "0.1.0"
