"""Exact construction and verification of quadratic factorizations of infinite-dimensional automorphisms."""

__version__ = "1.0.0"
