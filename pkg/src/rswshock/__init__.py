"""Numerical lab for shock formation in 2D rotating shallow water."""

__version__ = "0.1.0"
