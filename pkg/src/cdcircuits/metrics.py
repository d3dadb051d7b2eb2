"""State-quality metrics: target fidelity, relative energy errors, instantaneous infidelity.

Every function accepts either MPS/MPO objects or dense vectors/matrices, so the
same definitions serve the tensor-network pipeline and the dense oracle.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla

from .dmrg import DmrgConfig, ground_state
from .errors import UndefinedMetricError
from .mps import MPO, MPS, expval, inner, mpo_apply_dense

__all__ = [
    "overlap",
    "energy",
    "target_fidelity",
    "energy_errors",
    "relative_energy_error",
    "instantaneous_infidelity",
    "GroundStates",
]


def _n(x) -> int:
    if isinstance(x, (MPS, MPO)):
        return x.nsites
    return int(round(np.log2(np.asarray(x).shape[0])))


def overlap(a, b) -> complex:
    """``<a|b>`` for MPS or dense vectors (mixed inputs are densified)."""
    if _n(a) != _n(b):
        raise ValueError(f"size mismatch: {_n(a)} vs {_n(b)} sites")
    if isinstance(a, MPS) and isinstance(b, MPS):
        return inner(a, b)
    av = a.to_dense() if isinstance(a, MPS) else np.asarray(a)
    bv = b.to_dense() if isinstance(b, MPS) else np.asarray(b)
    return complex(np.vdot(av, bv))


def _norm2(a) -> float:
    return float(np.real(overlap(a, a)))


def energy(phi, h) -> float:
    """``<phi|H|phi> / <phi|phi>``; ``h`` is an MPO, dense matrix or sparse matrix."""
    if isinstance(phi, MPS) and isinstance(h, MPO):
        val = expval(phi, h)
    else:
        v = phi.to_dense() if isinstance(phi, MPS) else np.asarray(phi)
        hv = mpo_apply_dense(h, v) if isinstance(h, MPO) else h @ v
        val = np.vdot(v, hv)
    return float(np.real(val)) / _norm2(phi)


def target_fidelity(phi, psi_f) -> float:
    """``|<phi|psi_f>|^2`` for normalized inputs."""
    return float(abs(overlap(phi, psi_f)) ** 2)


def instantaneous_infidelity(phi, psi_s) -> float:
    """``1 - |<phi|psi_s>|^2``."""
    return 1.0 - target_fidelity(phi, psi_s)


def relative_energy_error(e: float, e_ref: float) -> float:
    """Signed ``(e - e_ref) / e_ref``."""
    if e_ref == 0.0:
        raise UndefinedMetricError("reference energy is zero")
    return (e - e_ref) / e_ref


def energy_errors(phi, h_f, psi_f, h_s, psi_s) -> tuple[float, float]:
    """Target and instantaneous relative energy errors ``(e_targ, e_inst)``.

    Reference energies are the expectation values in the supplied ground states.
    """
    e_targ = relative_energy_error(energy(phi, h_f), energy(psi_f, h_f))
    e_inst = relative_energy_error(energy(phi, h_s), energy(psi_s, h_s))
    return e_targ, e_inst


class GroundStates:
    """Cached instantaneous ground states of an adiabatic problem.

    ``method="dense"`` uses sparse Lanczos on the full Hilbert space and
    returns statevectors; ``"dmrg"`` returns MPS; ``"auto"`` picks dense up
    to ``dense_max`` sites. The default DMRG cutoff is tighter than the
    solver default because overlaps between ground states are first order in
    the truncated weight.
    """

    def __init__(self, problem, method: str = "auto", dmrg: DmrgConfig | None = None, dense_max: int = 12):
        if method == "auto":
            method = "dense" if problem.nsites <= dense_max else "dmrg"
        if method not in ("dense", "dmrg"):
            raise ValueError(f"unknown method {method!r}")
        self.problem, self.method = problem, method
        self.dmrg = dmrg or DmrgConfig(cutoff=1e-16)
        self._cache: dict[float, tuple[float, object]] = {}

    def hamiltonian(self, lam: float):
        if self.method == "dense":
            from .oracle import ising_dense

            return ising_dense(self.problem.params(lam), sparse=True)
        return self.problem.hamiltonian(lam)

    def __call__(self, lam: float) -> tuple[float, object]:
        key = round(float(lam), 15)
        if key not in self._cache:
            h = self.hamiltonian(lam)
            if self.method == "dense":
                dim = h.shape[0]
                if dim <= 64:
                    e, u = np.linalg.eigh(h.toarray())
                    e0, v0 = float(e[0]), u[:, 0]
                else:
                    v_init = np.ones(dim) / np.sqrt(dim)
                    e, u = spla.eigsh(h, k=1, which="SA", v0=v_init, tol=1e-13)
                    e0, v0 = float(e[0]), u[:, 0]
                self._cache[key] = (e0, v0.astype(complex))
            else:
                res = ground_state(h, self.dmrg)
                self._cache[key] = (res.energy, res.state)
        return self._cache[key]
