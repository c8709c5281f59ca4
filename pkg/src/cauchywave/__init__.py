"""Reconstruction of wave fields from Cauchy data on part of a boundary."""

__version__ = "0.1.0"
