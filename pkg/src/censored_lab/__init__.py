"""Numerical toolkit for the censored fractional operator with variable horizon d(x)."""

__version__ = "0.1.0"
