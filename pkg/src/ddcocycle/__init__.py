"""Numerical verification of Chern-Simons and Dixmier-Douady cocycles on nerves of compact groups."""

__version__ = "0.1.0"
