"""Curvature, rescaling limits and constraint checks for expanding vacuum spacetimes."""

__version__ = "0.1.0"
