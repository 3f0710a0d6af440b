"""Numerical laboratory for ideal flow around a lattice of small obstacles."""
__version__ = "0.1.0"
