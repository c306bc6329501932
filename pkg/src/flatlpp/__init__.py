"""Flat last-passage percolation, reflected Brownian motions with a wall and
log-gamma polymers: samplers, exact densities and verification experiments."""

__version__ = "0.1.0"
