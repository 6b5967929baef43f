"""Sliced Gaussian-mixture descriptors of point sets that preserve moments."""

__version__ = "0.1.0"
