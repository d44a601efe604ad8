# %% [markdown]
# # Pauli algebra and gadget construction
#
# Parse a target Hamiltonian, build three-local, k-local and measurement
# gadgets for it, and inspect the resulting few-body terms.

# %%
import numpy as np

from pertgadget import (
    build_k_local,
    build_measurement_gadget,
    build_three_local,
    format_pauli_sum,
    interleave_order,
    parse_pauli_sum,
)
from pertgadget.gadgets import default_recipe, jordan_farhi_recipe, validate_recipe
from pertgadget.pauli import PauliString, multiply

# %% [markdown]
# ## Products of Pauli strings
# Multiplication tracks the phase exactly.

# %%
a, b = PauliString.from_label("XYZ"), PauliString.from_label("ZZI")
prod = multiply(a, b)
print(prod.phase, prod.string.label(3))

# %% [markdown]
# ## A four-body target

# %%
target = parse_pauli_sum("""
qubits: 4
1.0  [Z0 Z1 Z2 Z3]
-0.5 [X0 Y1]
""")
print(format_pauli_sum(target))

# %%
g3 = build_three_local(target)
print("three-local:", g3.total_qubits, "qubits, lambda_max =", g3.lambda_max)
print("interleaved order:", interleave_order(g3))
print(format_pauli_sum(g3.v))

# %%
g4 = build_k_local(target, 4)
print("four-local:", g4.total_qubits, "qubits, max weight",
      max(s.weight for _, s in g4.hamiltonian(g4.lambda_max).terms))

# %%
gm = build_measurement_gadget(parse_pauli_sum("1 [X0 Y1 Z2]"))
print("measurement gadget:", gm.total_qubits, "qubits")
print(format_pauli_sum(gm.hamiltonian(0.05)))

# %% [markdown]
# ## Auxiliary recipes
# The validator accepts the default recipe and rejects one with a degenerate
# auxiliary ground space, returning the offending subspace.

# %%
for k in (2, 3, 4):
    print(k, validate_recipe(default_recipe(k)).passed)
bad = validate_recipe(jordan_farhi_recipe(3))
print(bad.passed, bad["unique_ground_state"].detail)
print(np.round(bad["unique_ground_state"].witness.real, 3).T)
