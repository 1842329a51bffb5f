"""Pivot-algorithm simulations of 3D self-avoiding walks tested against conformal-invariance predictions."""

__version__ = "0.1.0"
