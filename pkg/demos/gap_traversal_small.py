"""Counterdiabatic circuits on a small gap-traversal chain.

Fits two chunks of brickwork circuits to counterdiabatic evolution over a very
short time ``T = 0.3`` on ``N = 5`` spins and compares the final target
fidelity to plain second-order Trotter circuits with the same number of
two-qubit gates.

Run: ``python demos/gap_traversal_small.py`` (under a minute)
"""

from __future__ import annotations

from cdcircuits import (
    AGPSolverConfig,
    CircuitLayout,
    GroundStates,
    OptimizerConfig,
    Schedule,
    compress_chunks,
    gap_traversal,
    target_fidelity,
    trotter_adiabatic_circuit,
)
from cdcircuits.agp import slice_agps
from cdcircuits.circuit import apply_circuit_dense

n, T = 5, 0.3
prob = gap_traversal(n, gstar=0.48)
ref = GroundStates(prob)
psi0, psif = ref(0.0)[1], ref(1.0)[1]

sched = Schedule(T, 120, "sin2", M=2)
agps = [s.a_tilde for s in slice_agps(prob, sched, AGPSolverConfig(chi=4))]
run = compress_chunks(sched, prob, agps, CircuitLayout("brickwork", n, 4, 2), OptimizerConfig(Q=50), psi0=psi0, reference=ref)
gates = sum(c.two_qubit_count() for c in run.circuits)
print(f"CD circuits: {gates} two-qubit gates, target fidelity {run.slices[-1]['fid_target']:.4f}")

best = max(
    (target_fidelity(apply_circuit_dense(trotter_adiabatic_circuit(t, 8, prob.params), psi0), psif), t)
    for t in [0.5 * k for k in range(1, 21)]
)
print(f"best Trotter (R=8): target fidelity {best[0]:.4f} at T={best[1]}")
