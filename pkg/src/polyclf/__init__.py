"""Piecewise-affine convex CLF synthesis on configuration-constrained polyhedral epigraphs."""

__version__ = "0.1.0"
