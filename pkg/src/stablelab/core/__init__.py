"""Geometry, kernels, random streams and Monte Carlo engines."""
