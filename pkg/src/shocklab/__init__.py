"""Numerical laboratory for weighted relative-entropy stability of
Riemann-problem solutions with extremal shocks."""

__version__ = "0.1.0"
