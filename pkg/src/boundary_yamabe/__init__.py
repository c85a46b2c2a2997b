"""Boundary Yamabe problem on radially symmetric annuli."""

__version__ = "0.1.0"
