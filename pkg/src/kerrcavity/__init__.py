"""Driven-dissipative multimode Kerr cavity simulations."""

__version__ = "0.1.0"
