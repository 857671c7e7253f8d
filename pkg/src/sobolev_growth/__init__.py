"""Numerical experiments on Sobolev norm growth for a cubic equation with
sublinear fractional dispersion on the circle."""

__version__ = "0.1.0"
