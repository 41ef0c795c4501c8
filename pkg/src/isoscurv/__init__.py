"""Numerical and exact tools for (alpha, beta)-metrics of isotropic S-curvature."""

__version__ = "0.1.0"
