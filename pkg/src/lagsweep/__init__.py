"""Lagrangian tangent sweeps, tangent-space multiplicity and Lagrangian outer billiards."""

__version__ = "0.1.0"
