"""Numerical toolkit for dual quermassintegrals of origin-symmetric convex bodies."""

__version__ = "0.1.0"
