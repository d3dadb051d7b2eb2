"""MPO builders: Pauli sums, Ising chains, and short-time propagators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mps import DEFAULT_CUTOFF, MPO, mpo_add, mpo_mpo_mul
from .pauli import PauliSum, ising_pauli_sum

__all__ = [
    "IsingParams",
    "mpo_from_pauli_sum",
    "ising_hamiltonian",
    "taylor_propagator",
    "trotter2_propagator",
    "single_qubit_exp",
    "PAULI",
]

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# index = x + 2 z in the symplectic encoding
_BY_BITS = np.stack([PAULI["I"], PAULI["X"], PAULI["Z"], PAULI["Y"]])


@dataclass(frozen=True)
class IsingParams:
    """Couplings of ``sum J_k Z_k Z_k+1 + sum g_k X_k + sum h_k Z_k``."""

    J: tuple[float, ...]
    g: tuple[float, ...]
    h: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "J", tuple(float(v) for v in self.J))
        object.__setattr__(self, "g", tuple(float(v) for v in self.g))
        object.__setattr__(self, "h", tuple(float(v) for v in self.h))
        if not all(np.isfinite(v) for v in self.J + self.g + self.h):
            raise ValueError("Ising couplings must be finite")
        n = len(self.g)
        if n < 1 or len(self.h) != n or len(self.J) != n - 1:
            raise ValueError(
                f"inconsistent lengths: len(J)={len(self.J)}, len(g)={len(self.g)}, len(h)={len(self.h)}"
            )

    @property
    def nsites(self) -> int:
        return len(self.g)

    @classmethod
    def uniform(cls, n: int, J: float, g: float, h: float) -> "IsingParams":
        return cls((J,) * (n - 1), (g,) * n, (h,) * n)

    def interpolate(self, other: "IsingParams", lam: float) -> "IsingParams":
        """``(1 - lam) * self + lam * other``."""
        if other.nsites != self.nsites:
            raise ValueError("size mismatch")
        mix = lambda a, b: tuple((1 - lam) * x + lam * y for x, y in zip(a, b))  # noqa: E731
        return IsingParams(mix(self.J, other.J), mix(self.g, other.g), mix(self.h, other.h))

    def __sub__(self, other: "IsingParams") -> "IsingParams":
        d = lambda a, b: tuple(x - y for x, y in zip(a, b))  # noqa: E731
        return IsingParams(d(self.J, other.J), d(self.g, other.g), d(self.h, other.h))

    def to_pauli(self) -> PauliSum:
        return ising_pauli_sum(self.J, self.g, self.h)

    def is_classical(self) -> bool:
        return all(v == 0.0 for v in self.g)


def _batch_mpo(ps: PauliSum, start: int, stop: int) -> MPO:
    n = ps.nsites
    k = np.arange(n, dtype=np.uint64)
    x = ((ps.x[start:stop, None] >> k) & np.uint64(1)).astype(np.int64)
    z = ((ps.z[start:stop, None] >> k) & np.uint64(1)).astype(np.int64)
    ops = _BY_BITS[x + 2 * z]  # (B, n, 2, 2)
    # phase convention: (1,1) is Y exactly, matching _BY_BITS
    c = ps.coeffs[start:stop]
    b = stop - start
    idx = np.arange(b)
    tensors = []
    for site in range(n):
        if n == 1:
            t = np.einsum("b,bij->ij", c, ops[:, 0]).reshape(1, 2, 2, 1)
        elif site == 0:
            t = (c[:, None, None] * ops[:, 0]).transpose(1, 2, 0).reshape(1, 2, 2, b)
        elif site == n - 1:
            t = ops[:, site].reshape(b, 2, 2, 1)
        else:
            t = np.zeros((b, 2, 2, b), dtype=complex)
            t[idx, :, :, idx] = ops[:, site]
        tensors.append(t)
    return MPO(tensors)


def mpo_from_pauli_sum(p: PauliSum, cutoff: float = DEFAULT_CUTOFF, batch: int = 64) -> MPO:
    """MPO of a Pauli sum: exact direct-sum blocks of product terms, then SVD compression.

    Terms are processed in batches; the running sum is compressed after every
    batch so intermediate bonds stay bounded by the final rank plus ``batch``.
    An empty sum gives the zero MPO with bond dimension 1.
    """
    if len(p) == 0:
        return MPO.zero(p.nsites)
    acc = None
    for start in range(0, len(p), batch):
        part = _batch_mpo(p, start, min(len(p), start + batch))
        acc = part if acc is None else mpo_add(acc, part)
        acc = acc.compress(cutoff=cutoff)
    return acc


def ising_hamiltonian(p: IsingParams, cutoff: float = DEFAULT_CUTOFF) -> MPO:
    """Nearest-neighbour Ising MPO with bond dimension 3 (finite-state form).

    Built directly from the operator-valued automaton; zero couplings can make
    the result compressible, which ``cutoff`` is then used for.
    """
    n = p.nsites
    I, X, Z = PAULI["I"], PAULI["X"], PAULI["Z"]
    if n == 1:
        return MPO([(p.g[0] * X + p.h[0] * Z).reshape(1, 2, 2, 1)])
    tensors = []
    for k in range(n):
        local = p.g[k] * X + p.h[k] * Z
        w = np.zeros((3, 2, 2, 3), dtype=complex)
        # states: 0 = done, 1 = pending Z, 2 = start
        w[0, :, :, 0] = I
        w[1, :, :, 0] = Z
        w[2, :, :, 0] = local
        w[2, :, :, 2] = I
        if k < n - 1:
            w[2, :, :, 1] = p.J[k] * Z
        if k == 0:
            w = w[2:3]
        elif k == n - 1:
            w = w[..., 0:1]
        tensors.append(w)
    mpo = MPO(tensors)
    if cutoff is not None and any(v == 0.0 for v in p.J + p.g + p.h):
        mpo = mpo.compress(cutoff=cutoff)
    return mpo


def taylor_propagator(h: MPO, tau: float, order: int = 1, cutoff: float = DEFAULT_CUTOFF) -> MPO:
    """Truncated Taylor series of ``exp(-i tau H)`` to the given order (1 or 2)."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    n = h.nsites
    w = mpo_add(MPO.identity(n), h.scale(-1j * tau))
    if order == 2:
        w = mpo_add(w, mpo_mpo_mul(h, h, cutoff=cutoff).scale(-0.5 * tau * tau))
    return w.compress(cutoff=cutoff)


def single_qubit_exp(g: float, h: float, t: float) -> np.ndarray:
    """``exp(-i t (g X + h Z))`` in closed form."""
    r = float(np.hypot(g, h))
    if r == 0.0:
        return np.eye(2, dtype=complex)
    n_op = (g * PAULI["X"] + h * PAULI["Z"]) / r
    return np.cos(r * t) * np.eye(2) - 1j * np.sin(r * t) * n_op


def trotter2_propagator(p: IsingParams, tau: float) -> MPO:
    """Second-order Trotter step ``e^{-i tau H_1 / 2} e^{-i tau H_zz} e^{-i tau H_1 / 2}``.

    ``H_1`` collects the single-site fields, ``H_zz`` the couplings. The ZZ
    factor is diagonal with operator Schmidt rank 2 per bond, so the MPO has
    bond dimension at most 2.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    n = p.nsites
    I, Z = PAULI["I"], PAULI["Z"]
    tensors = []
    for k in range(n):
        half = single_qubit_exp(p.g[k], p.h[k], tau / 2)
        # exp(-i tau J ZZ) = cos(tau J) I.I - i sin(tau J) Z.Z, weights kept on the left site
        left_ops = [I] if k == 0 else [I, Z]
        right_ops = [I] if k == n - 1 else [np.cos(tau * p.J[k]) * I, -1j * np.sin(tau * p.J[k]) * Z]
        t = np.zeros((len(left_ops), 2, 2, len(right_ops)), dtype=complex)
        for a, la in enumerate(left_ops):
            for b, rb in enumerate(right_ops):
                t[a, :, :, b] = half @ la @ rb @ half
        tensors.append(t)
    return MPO(tensors)
