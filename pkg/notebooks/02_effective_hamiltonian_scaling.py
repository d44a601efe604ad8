# %% [markdown]
# # Effective Hamiltonian scaling
#
# Diagonalize gadget Hamiltonians over a grid of couplings, fit the
# low-energy block to the target, and check how the residual shrinks.

# %%
import numpy as np

from pertgadget import build_three_local, effective_hamiltonian, parse_pauli_sum, xi_constant
from pertgadget.perturbation import geometric_grid, verify_bloch, verify_corollary1, verify_theorem1

# %%
g = build_three_local(parse_pauli_sum("1 [Z0 Z1 Z2]"))
grid = geometric_grid(g.lambda_max / 20, g.lambda_max / 2, 5)
report = verify_theorem1(g, grid)
print("fitted exponent", report.fitted_exponent, "interval", report.exponent_ci)
print(report.to_csv("residual"))

# %% [markdown]
# The fitted coefficient times the penalty constant approaches lambda^k.

# %%
for d in report.decompositions:
    print(f"{d.lam:.5f}  {d.a_fit * xi_constant(3) / d.lam**3:.6f}")

# %% [markdown]
# ## One point in detail

# %%
dec = effective_hamiltonian(g, grid[2])
print(dec.to_json())

# %% [markdown]
# ## Bloch series against exact diagonalization

# %%
bloch = verify_bloch(g, grid, order=3)
print("Bloch distance exponent", bloch.fitted_exponent, bloch.passed)

# %% [markdown]
# ## Reduced ground states
# A non-degenerate, non-diagonal target gives a partial-trace distance that
# shrinks at least linearly in the coupling.

# %%
g2 = build_three_local(parse_pauli_sum("1 [Z0 Z1]\n0.5 [X0]\n0.3 [Z1]"))
cor = verify_corollary1(g2, geometric_grid(g2.lambda_max / 20, g2.lambda_max / 2, 5))
print("distance exponent", cor.fitted_exponent, cor.passed)
print(cor.notes)
