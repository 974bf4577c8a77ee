"""Lattice mean-field models: one-body operators, exact bosonic ground states
and one-body functionals."""

from .checks import convergence_sweep, fourier_pair_decomposition, localized_h2_gap, stability_constant
from .functionals import hartree_energy, hartree_minimize, nls_minimize
from .lattice import (
    LatticeModel,
    PairPotential,
    Potential,
    VectorPotential,
    build_one_body,
    scaled_interaction,
    spectral_projector,
)
from .nbody import ConvergenceError, build_n_body, ground_state

__all__ = [
    "ConvergenceError",
    "LatticeModel",
    "PairPotential",
    "Potential",
    "VectorPotential",
    "build_n_body",
    "build_one_body",
    "convergence_sweep",
    "fourier_pair_decomposition",
    "ground_state",
    "hartree_energy",
    "hartree_minimize",
    "localized_h2_gap",
    "nls_minimize",
    "scaled_interaction",
    "spectral_projector",
    "stability_constant",
]
