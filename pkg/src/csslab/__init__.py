"""Numerical laboratory for equivariant Chern-Simons-Schrodinger dynamics."""

__version__ = "0.1.0"
