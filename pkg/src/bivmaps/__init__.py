"""Bivariate choropleth designs, popchart overlays, task oracles and
estimation statistics for map-reading studies."""

__version__ = "0.1.0"
