"""Adiabatic Ising problems: gap traversal, critical preparation, random classical chains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mps import MPO, MPS
from .operators import IsingParams, ising_hamiltonian
from .pauli import PauliSum

__all__ = [
    "AdiabaticProblem",
    "gap_traversal",
    "critical_preparation",
    "combinatorial_instance",
    "nc_comparison_hamiltonian",
    "GT_GSTAR",
    "classical_chain_minimum",
]

# g* per system size for the gap-traversal family
GT_GSTAR = {7: 0.48, 15: 0.45, 23: 0.435, 31: 0.43}

_J_SET = (0.2, 0.4, 0.6, 0.8, 1.0)
_H_SET = (0.0, 0.2, 0.4, 0.6, 0.8)


@dataclass(frozen=True)
class AdiabaticProblem:
    """Linear interpolation ``(1 - lam) H_i + lam H_f`` between two Ising chains."""

    initial: IsingParams
    final: IsingParams
    name: str = "ising"

    def __post_init__(self) -> None:
        if self.initial.nsites != self.final.nsites:
            raise ValueError("initial and final Hamiltonians differ in size")

    @property
    def nsites(self) -> int:
        return self.initial.nsites

    def params(self, lam: float) -> IsingParams:
        return self.initial.interpolate(self.final, lam)

    def dparams(self) -> IsingParams:
        return self.final - self.initial

    def hamiltonian(self, lam: float) -> MPO:
        return ising_hamiltonian(self.params(lam))

    def dh(self) -> MPO:
        return ising_hamiltonian(self.dparams())

    def pauli(self, lam: float) -> PauliSum:
        return self.params(lam).to_pauli()

    def dh_pauli(self) -> PauliSum:
        return self.dparams().to_pauli()

    def initial_product_state(self) -> MPS | None:
        """Ground state of ``H_i`` when it is a pure transverse field (``J = h = 0``)."""
        p = self.initial
        if any(p.J) or any(p.h):
            return None
        vs = []
        for g in p.g:
            if g > 0:
                vs.append(np.array([1.0, -1.0]) / np.sqrt(2))
            elif g < 0:
                vs.append(np.array([1.0, 1.0]) / np.sqrt(2))
            else:
                return None
        s = MPS.product_state(vs)
        s.canonicalize(0)
        return s


def gap_traversal(n: int, gstar: float | None = None) -> AdiabaticProblem:
    """Paramagnet ``H(0, g*, 0)`` to antiferromagnet ``H(1, g*, 1)``."""
    if gstar is None:
        if n not in GT_GSTAR:
            raise ValueError(f"no default g* for N={n}; pass gstar explicitly")
        gstar = GT_GSTAR[n]
    return AdiabaticProblem(IsingParams.uniform(n, 0.0, gstar, 0.0), IsingParams.uniform(n, 1.0, gstar, 1.0), f"gt{n}")


def critical_preparation(n: int) -> AdiabaticProblem:
    """``H(0, -1, 0)`` to the critical transverse-field chain ``H(1, -1, 0)``."""
    return AdiabaticProblem(IsingParams.uniform(n, 0.0, -1.0, 0.0), IsingParams.uniform(n, 1.0, -1.0, 0.0), f"critical{n}")


def combinatorial_instance(n: int, seed: int, g0: float = 0.5) -> AdiabaticProblem:
    """Random classical chain: ``J_k`` from +-{0.2..1.0}, ``h_k`` from +-{0.0..0.8}.

    Draws come from a counter-based Philox stream keyed by ``seed``.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    J = rng.choice(_J_SET, size=n - 1) * rng.choice([-1.0, 1.0], size=n - 1)
    h = rng.choice(_H_SET, size=n) * rng.choice([-1.0, 1.0], size=n)
    final = IsingParams(tuple(J), (0.0,) * n, tuple(h))
    initial = IsingParams((0.0,) * (n - 1), (g0,) * n, (0.0,) * n)
    return AdiabaticProblem(initial, final, f"classical{n}-seed{seed}")


def nc_comparison_hamiltonian(n: int = 14) -> AdiabaticProblem:
    """``sum Z_k Z_k+1 + 0.3 lam sum (X_k + Z_k)`` written as an interpolation."""
    return AdiabaticProblem(IsingParams.uniform(n, 1.0, 0.0, 0.0), IsingParams.uniform(n, 1.0, 0.3, 0.3), f"nc{n}")


def classical_chain_minimum(p: IsingParams) -> tuple[float, list[int]]:
    """Exact minimum of a classical Ising chain by dynamic programming.

    Returns the energy and one optimal bit string (bit 0 means Z = +1).
    """
    if not p.is_classical():
        raise ValueError("transfer-matrix minimum requires g = 0")
    n = p.nsites
    spins = np.array([1.0, -1.0])
    best = p.h[0] * spins
    back = []
    for k in range(1, n):
        cand = best[:, None] + p.J[k - 1] * spins[:, None] * spins[None, :] + p.h[k] * spins[None, :]
        back.append(np.argmin(cand, axis=0))
        best = cand.min(axis=0)
    last = int(np.argmin(best))
    bits = [last]
    for k in range(n - 2, -1, -1):
        bits.append(int(back[k][bits[-1]]))
    return float(best.min()), bits[::-1]
