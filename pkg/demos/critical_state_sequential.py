"""Preparing a critical Ising ground state with a sequential circuit.

Compresses second-order Trotter evolution along a slow path into a single
two-layer sequential circuit on ``N = 8`` spins and prints the instantaneous
infidelity every few slices.

Run: ``python demos/critical_state_sequential.py``
"""

from __future__ import annotations

from cdcircuits import CircuitLayout, GroundStates, OptimizerConfig, Schedule, compress_chunks, critical_preparation

n = 8
prob = critical_preparation(n)
ref = GroundStates(prob)
sched = Schedule(8.0, 8, "nested-sin2")
run = compress_chunks(
    sched,
    prob,
    None,
    CircuitLayout("sequential", n, 2),
    OptimizerConfig(Q=50, memory=50, carry_memory=True),
    psi0=ref(0.0)[1],
    propagator="trotter2",
    reference=ref,
)
for row in run.slices[::8] + [run.slices[-1]]:
    print(f"slice {row['slice']:3d}  lambda {row['lambda']:.3f}  infidelity {row['inst_infidelity']:.2e}")
