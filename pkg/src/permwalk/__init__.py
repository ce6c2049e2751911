"""Permuted random walks on the interval [-n, n]."""

__version__ = "0.1.0"
