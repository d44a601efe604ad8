# %% [markdown]
# # Perturbation series combinatorics
#
# Staircase index sets, the penalty constant and the energy shift polynomial.

# %%
from pertgadget import build_three_local, parse_pauli_sum, staircase_indices, xi_constant
from pertgadget.perturbation import measurement_combinatorial_factor, shift_polynomial, xi_order_weights

# %%
for m in range(2, 7):
    print(m, len(staircase_indices(m, "A")), staircase_indices(m, "A")[:4])

# %% [markdown]
# The penalty constant grows quickly with the locality.

# %%
for k in range(2, 7):
    print(k, xi_constant(k))

# %%
for perm, weights in list(xi_order_weights(3))[:3]:
    print(perm, weights)

# %%
print("measurement factor", measurement_combinatorial_factor())
g = build_three_local(parse_pauli_sum("1 [Z0 Z1 Z2]"))
print("shift polynomial", shift_polynomial(g, 2))
