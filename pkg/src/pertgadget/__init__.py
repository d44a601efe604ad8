"""Perturbative gadgets for many-body Pauli Hamiltonians.

Build few-body gadget Hamiltonians, check their low-energy physics by exact
diagonalization and degenerate perturbation theory, and simulate variational
circuits on them.
"""

from .pauli import PauliString, PauliSum, parse_pauli_sum, format_pauli_sum
from .gadgets import (
    GadgetModel,
    RecipeSpec,
    build_from_recipe,
    build_k_local,
    build_measurement_gadget,
    build_three_local,
    interleave_order,
    measurement_groups,
    validate_recipe,
)
from .perturbation import (
    bloch_expansion,
    effective_hamiltonian,
    staircase_indices,
    verify_corollary1,
    verify_theorem1,
    verify_theorem3,
    xi_constant,
)

__version__ = "0.1.0"
