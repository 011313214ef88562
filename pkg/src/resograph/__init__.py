"""Resonances and embedded eigenvalues of quantum graphs with leads."""

__version__ = "0.1.0"
