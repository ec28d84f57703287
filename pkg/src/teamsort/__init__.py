"""Equilibrium sorting and wages with heterogeneous relative concerns."""

__version__ = "0.1.0"
