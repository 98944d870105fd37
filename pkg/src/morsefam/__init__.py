"""Exact Morse homology of families: filtered complexes, spectral sequences,
Novikov coefficients and numerical flow-line counting."""

__version__ = "0.1.0"
