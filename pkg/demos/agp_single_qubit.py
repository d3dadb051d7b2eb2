"""Variational and exact gauge potential of a single driven qubit.

For ``H = (1 - lam) X + lam Z`` at ``lam = 0.5`` the adiabatic gauge
potential is exactly ``-Y``, and a bond-dimension-one MPO recovers it.

Run: ``python demos/agp_single_qubit.py``
"""

from __future__ import annotations

import numpy as np

from cdcircuits import AGPSolverConfig, IsingParams, ising_hamiltonian, solve_variational_agp
from cdcircuits.oracle import exact_agp, ising_dense

h = IsingParams((), (0.5,), (0.5,))  # g X + h Z at lam = 0.5
dh = IsingParams((), (-1.0,), (1.0,))

sol = solve_variational_agp(ising_hamiltonian(h), ising_hamiltonian(dh), AGPSolverConfig(chi=1, eta=1e-12))
exact = exact_agp(ising_dense(h), ising_dense(dh))

np.set_printoptions(precision=6, suppress=True)
print("variational A:\n", sol.a_tilde.to_dense())
print("exact A:\n", exact)
print(f"normalized cost {sol.normalized_cost:.2e}, normalized error {sol.normalized_error:.2e}")
