"""Radial DEA efficiency scoring and ownership-concentration tables."""

__version__ = "0.1.0"
