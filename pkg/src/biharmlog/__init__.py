"""Numerical toolkit for the clamped-plate critical problem with a
logarithmic perturbation on balls."""

__version__ = "0.1.0"
