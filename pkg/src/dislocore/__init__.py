"""Atomistic and Peierls-Nabarro models of a bilayer edge dislocation."""

__version__ = "0.1.0"
