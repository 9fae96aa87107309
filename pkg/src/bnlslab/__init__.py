"""Spectral toolkit for biharmonic NLS ground states, thresholds and dynamics."""

__version__ = "0.1.0"
