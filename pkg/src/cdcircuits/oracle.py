"""Dense statevector reference: spectra, propagators, exact gauge potentials, CD evolution.

Everything here works with explicit ``2^N x 2^N`` matrices and is limited to
``N <= DENSE_CAP``. It shares no code with the tensor-network routes beyond the
Ising parameter container, so it can serve as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ResourceError, ValidationError
from .operators import IsingParams
from .schedule import Schedule

__all__ = [
    "DENSE_CAP",
    "DenseOperator",
    "ising_dense",
    "exact_agp",
    "propagator",
    "exact_evolve_cd",
    "nc_dense",
    "nc_ideal_dynamics",
    "trajectory_metrics",
    "ground_state_dense",
    "evolve_piecewise",
    "trotter2_dense",
]

DENSE_CAP = 14


@dataclass
class DenseOperator:
    """A ``2^N x 2^N`` matrix with its qubit count."""

    matrix: np.ndarray
    cap: int = DENSE_CAP

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"expected a square matrix, got {m.shape}")
        n = int(round(np.log2(m.shape[0])))
        if 2**n != m.shape[0]:
            raise ValidationError(f"dimension {m.shape[0]} is not a power of two")
        if n > self.cap:
            raise ResourceError(f"N={n} exceeds the dense cap {self.cap}")
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nsites(self) -> int:
        return int(round(np.log2(self.dim)))


def _mat(a) -> np.ndarray:
    return a.matrix if isinstance(a, DenseOperator) else np.asarray(a)


@lru_cache(maxsize=None)
def _ising_terms(n: int) -> tuple[np.ndarray, tuple]:
    """Z eigenvalues per site (shape ``(n, 2^n)``) and the sparse ``X_k`` flips."""
    idx = np.arange(2**n)
    shifts = n - 1 - np.arange(n)
    z = 1.0 - 2.0 * ((idx[None, :] >> shifts[:, None]) & 1)
    z.setflags(write=False)
    ones = np.ones(2**n)
    xs = tuple(sp.csr_matrix((ones, (idx ^ (1 << int(b)), idx)), shape=(2**n, 2**n)) for b in shifts)
    return z, xs


def ising_dense(p: IsingParams, sparse: bool = False):
    """Dense (or CSR) matrix of ``sum J ZZ + sum g X + sum h Z``."""
    n = p.nsites
    if n > DENSE_CAP:
        raise ResourceError(f"N={n} exceeds the dense cap {DENSE_CAP}")
    z, xs = _ising_terms(n)
    diag = np.asarray(p.h) @ z
    if n > 1:
        diag = diag + np.asarray(p.J) @ (z[:-1] * z[1:])
    out = sp.diags(diag, format="csr")
    for k in range(n):
        if p.g[k]:
            out = out + p.g[k] * xs[k]
    return out.tocsr() if sparse else out.toarray()


def _check_hermitian(m: np.ndarray, tol: float = 1e-10) -> None:
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.conj().T)) > tol * scale:
        raise ValidationError("matrix is not Hermitian")


def exact_agp(h, dh, degeneracy_tol: float = 1e-10) -> np.ndarray:
    """``A = -i sum_{v != w} <v|dH|w> / (E_v - E_w) |v><w|`` from a full diagonalization.

    Pairs with ``|E_v - E_w| < degeneracy_tol`` contribute zero.
    """
    hm, dm = _mat(h), _mat(dh)
    _check_hermitian(hm)
    e, u = np.linalg.eigh(hm)
    d = u.conj().T @ dm @ u
    gap = e[:, None] - e[None, :]
    mask = np.abs(gap) >= degeneracy_tol
    a_bar = np.zeros_like(d, dtype=complex)
    a_bar[mask] = -1j * d[mask] / gap[mask]
    return u @ a_bar @ u.conj().T


def propagator(g: np.ndarray, tau: float) -> np.ndarray:
    """``exp(-i tau G)``; eigendecomposition for Hermitian ``G``, Pade otherwise."""
    g = np.asarray(g)
    if np.allclose(g, g.conj().T, atol=1e-12 * max(1.0, float(np.max(np.abs(g))))):
        e, u = np.linalg.eigh(0.5 * (g + g.conj().T))
        return (u * np.exp(-1j * tau * e)) @ u.conj().T
    return sla.expm(-1j * tau * g)


def ground_state_dense(h) -> tuple[float, np.ndarray]:
    e, u = np.linalg.eigh(_mat(h))
    return float(e[0]), u[:, 0]


def exact_evolve_cd(
    hbuilder: Callable[[float], np.ndarray],
    sched: Schedule,
    psi0: np.ndarray,
    agp_source: str | Callable[[int, float], np.ndarray] = "exact",
    dh: np.ndarray | Callable[[float], np.ndarray] | None = None,
    degeneracy_tol: float = 1e-10,
) -> np.ndarray:
    """Slice-by-slice evolution under ``H(lam_s) + lam_dot_s A_s``.

    Args:
        hbuilder: ``lam -> H(lam)`` as a dense matrix.
        sched: Slicing of the protocol; ``lam`` and ``lam_dot`` are taken at slice midpoints.
        psi0: Initial statevector.
        agp_source: ``"exact"`` (spectral formula, needs ``dh``), ``"none"``,
            or a callable ``(slice, lam) -> A``.
        dh: ``dH/dlam`` (matrix or callable of ``lam``) for the exact AGP.

    Returns:
        Array of shape ``(n_slices + 1, 2^N)``; row ``s`` is the state after ``s`` slices.
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    traj = [psi.copy()]
    tau = sched.tau
    for s, (_, lam, ldot) in enumerate(sched.slice_midpoints()):
        hm = np.asarray(hbuilder(lam), dtype=complex)
        if agp_source == "none" or ldot == 0.0:
            g = hm
        elif agp_source == "exact":
            if dh is None:
                raise ValueError("exact AGP needs dh")
            dm = dh(lam) if callable(dh) else dh
            g = hm + ldot * exact_agp(hm, dm, degeneracy_tol)
        elif callable(agp_source):
            g = hm + ldot * np.asarray(agp_source(s, lam))
        else:
            raise ValueError(f"unknown agp_source {agp_source!r}")
        psi = propagator(g, tau) @ psi
        traj.append(psi.copy())
    return np.array(traj)


def nc_dense(h: np.ndarray, dh: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense nested-commutator gauge potential and its prefactors.

    Returns ``(A_NC, alphas)``; ``order = 0`` gives the zero operator.
    """
    h = np.asarray(h, dtype=complex)
    dh = np.asarray(dh, dtype=complex)
    if order == 0:
        return np.zeros_like(h), np.zeros(0)
    ops = [dh]
    for _ in range(2 * order):
        ops.append(h @ ops[-1] - ops[-1] @ h)
    even = [ops[2 * k] for k in range(1, order + 1)]
    gram = np.array([[np.real(np.vdot(a, b)) for b in even] for a in even])
    rhs = -np.array([np.real(np.vdot(o, dh)) for o in even])
    scale = np.sqrt(np.clip(np.diag(gram), 0, None))
    alphas = np.zeros(order)
    live = scale > 1e-14 * max(1.0, np.linalg.norm(dh))
    if np.any(live):
        g = gram[np.ix_(live, live)] / np.outer(scale[live], scale[live])
        beta = np.linalg.lstsq(g, rhs[live] / scale[live], rcond=1e-13)[0]
        alphas[live] = beta / scale[live]
    a = sum(1j * alphas[k - 1] * ops[2 * k - 1] for k in range(1, order + 1))
    return a, alphas


def nc_ideal_dynamics(order: int, problem, sched: Schedule, psi0: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Dense CD evolution with the order-``l`` nested-commutator AGP at every slice.

    Args:
        order: NC order ``l`` (0 disables the CD term).
        problem: An ``AdiabaticProblem``.
        sched: Slicing of the protocol.
        psi0: Initial state; defaults to the ground state of ``H(0)``.

    Returns:
        Per-slice traces ``t``, ``lambda``, ``fid_target``, ``e_targ``,
        ``e_inst`` and ``inst_infidelity`` (index 0 is the initial state).
    """
    hb = lambda lam: ising_dense(problem.params(lam))  # noqa: E731
    dh = ising_dense(problem.dparams())
    if psi0 is None:
        psi0 = ground_state_dense(hb(0.0))[1]

    def agp(_s, lam):
        return nc_dense(hb(lam), dh, order)[0]

    traj = exact_evolve_cd(hb, sched, psi0, agp_source=agp if order > 0 else "none")
    return trajectory_metrics(traj, problem, sched)


def trajectory_metrics(traj: np.ndarray, problem, sched: Schedule) -> dict[str, np.ndarray]:
    """Dense target/instantaneous metrics for a trajectory of statevectors."""
    hf = ising_dense(problem.params(1.0))
    ef, psif = ground_state_dense(hf)
    times = [0.0] + [t for t, _ in sched.slice_ends()]
    lams = [0.0] + [lam for _, lam in sched.slice_ends()]
    out = {k: [] for k in ("t", "lambda", "fid_target", "e_targ", "e_inst", "inst_infidelity")}
    for psi, t, lam in zip(traj, times, lams):
        hs = ising_dense(problem.params(lam))
        es, psis = ground_state_dense(hs)
        out["t"].append(t)
        out["lambda"].append(lam)
        out["fid_target"].append(abs(np.vdot(psi, psif)) ** 2)
        out["e_targ"].append((np.real(np.vdot(psi, hf @ psi)) - ef) / ef)
        out["e_inst"].append((np.real(np.vdot(psi, hs @ psi)) - es) / es)
        out["inst_infidelity"].append(1.0 - abs(np.vdot(psi, psis)) ** 2)
    return {k: np.array(v) for k, v in out.items()}


def evolve_piecewise(hbuilder: Callable[[float], np.ndarray], lam_of_t: Callable[[float], float], T: float, steps: int, psi0: np.ndarray) -> np.ndarray:
    """Time-ordered evolution with ``steps`` exact midpoint exponentials."""
    psi = np.asarray(psi0, dtype=complex).copy()
    dt = T / steps
    for k in range(steps):
        psi = propagator(hbuilder(lam_of_t((k + 0.5) * dt)), dt) @ psi
    return psi


def trotter2_dense(p: IsingParams, tau: float) -> np.ndarray:
    """Dense second-order Trotter step ``e^{-i tau H1/2} e^{-i tau Hzz} e^{-i tau H1/2}``."""
    n = p.nsites
    fields = IsingParams((0.0,) * (n - 1), p.g, p.h)
    zz = IsingParams(p.J, (0.0,) * n, (0.0,) * n)
    half = propagator(ising_dense(fields), tau / 2)
    return half @ propagator(ising_dense(zz), tau) @ half
