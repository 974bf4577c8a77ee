"""Finite-dimensional quantum de Finetti constructions, entropy inequalities
and lattice mean-field checks for bosonic ground states."""

__version__ = "0.1.0"
