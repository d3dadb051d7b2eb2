"""Two-site DMRG for ground and first excited states, and spectral-gap scans."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import ValidationError
from .mps import MPO, MPS, expval, inner, mpo_apply
from .tensor import svd_truncate

__all__ = ["DmrgConfig", "DmrgResult", "ground_state", "first_excited", "gap_scan", "write_gap_csv"]

log = logging.getLogger(__name__)

_DENSE_LIMIT = 256


@dataclass
class DmrgConfig:
    max_bond: int = 64
    cutoff: float = 1e-12
    sweeps: int = 20
    convergence_tol: float = 1e-11
    penalty_weight: float | None = None
    local_tol: float = 1e-10
    init_bond: int = 8
    seed: int = 1234

    def __post_init__(self) -> None:
        if self.max_bond < 1:
            raise ValueError("max_bond must be >= 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.penalty_weight is not None and self.penalty_weight <= 0:
            raise ValueError("penalty_weight must be positive")


@dataclass
class DmrgResult:
    energy: float
    state: MPS
    variance: float
    converged: bool
    sweep_energies: list[float] = field(default_factory=list)

    def __iter__(self):
        # allows ``energy, state = ground_state(...)``
        return iter((self.energy, self.state))


def _left_update(env, a, w, b):
    # env (a, w, b): bra bond, mpo bond, ket bond
    x = np.tensordot(env, a.conj(), axes=(0, 0))  # (w, b, s, c)
    x = np.tensordot(x, w, axes=([0, 2], [0, 1]))  # (b, c, t, v)
    x = np.tensordot(x, b, axes=([0, 2], [0, 1]))  # (c, v, d)
    return x


def _right_update(env, a, w, b):
    # env (c, v, d) on the right bond; site tensors (a, s, c)
    x = np.tensordot(a.conj(), env, axes=(2, 0))  # (a, s, v, d)
    x = np.tensordot(x, w, axes=([1, 2], [1, 3]))  # (a, d, w, t)
    x = np.tensordot(x, b, axes=([1, 3], [2, 1]))  # (a, w, b)
    return x


def _ov_left(env, g, a):
    x = np.tensordot(env, g.conj(), axes=(0, 0))  # (b, s, h)
    return np.tensordot(x, a, axes=([0, 1], [0, 1]))  # (h, d)


def _ov_right(env, g, a):
    x = np.tensordot(g.conj(), env, axes=(2, 0))  # (g, s, d)
    return np.tensordot(x, a, axes=([1, 2], [1, 2]))  # (g, b)


class _Sweeper:
    """Environment bookkeeping for two-site sweeps with optional projector penalties."""

    def __init__(self, h: MPO, psi: MPS, penalties: list[tuple[MPS, float]]):
        self.h = h
        self.psi = psi
        self.n = psi.nsites
        self.pen = penalties
        n = self.n
        one3 = np.ones((1, 1, 1), dtype=complex)
        self.L: list = [None] * (n + 1)
        self.R: list = [None] * (n + 1)
        self.L[0] = one3
        self.R[n] = one3
        self.OL = [[None] * (n + 1) for _ in penalties]
        self.OR = [[None] * (n + 1) for _ in penalties]
        for j in range(len(penalties)):
            self.OL[j][0] = np.ones((1, 1), dtype=complex)
            self.OR[j][n] = np.ones((1, 1), dtype=complex)
        psi.canonicalize(0)
        for k in range(n - 1, 0, -1):
            self._build_right(k)

    def _build_left(self, k):
        t = self.psi.tensors[k]
        self.L[k + 1] = _left_update(self.L[k], t, self.h.tensors[k], t)
        for j, (g, _) in enumerate(self.pen):
            self.OL[j][k + 1] = _ov_left(self.OL[j][k], g.tensors[k], t)

    def _build_right(self, k):
        t = self.psi.tensors[k]
        self.R[k] = _right_update(self.R[k + 1], t, self.h.tensors[k], t)
        for j, (g, _) in enumerate(self.pen):
            self.OR[j][k] = _ov_right(self.OR[j][k + 1], g.tensors[k], t)

    def local_problem(self, k):
        L, R = self.L[k], self.R[k + 2]
        w1, w2 = self.h.tensors[k], self.h.tensors[k + 1]
        a1, a2 = self.psi.tensors[k], self.psi.tensors[k + 1]
        shape = (a1.shape[0], a1.shape[1], a2.shape[1], a2.shape[2])
        projs = []
        for j, (g, wt) in enumerate(self.pen):
            u = np.tensordot(self.OL[j][k], g.tensors[k].conj(), axes=(0, 0))  # (b, s, x)
            u = np.tensordot(u, g.tensors[k + 1].conj(), axes=(2, 0))  # (b, s, t, y)
            u = np.tensordot(u, self.OR[j][k + 2], axes=(3, 0))  # (b, s, t, d)
            projs.append((u.reshape(-1).conj(), wt))

        def matvec(v):
            x = v.reshape(shape)
            y = np.tensordot(L, x, axes=(2, 0))  # (a, w, s1, s2, d)
            y = np.tensordot(y, w1, axes=([1, 2], [0, 2]))  # (a, s2, d, o1, x)
            y = np.tensordot(y, w2, axes=([4, 1], [0, 2]))  # (a, d, o1, o2, v)
            y = np.tensordot(y, R, axes=([1, 4], [2, 1]))  # (a, o1, o2, c)
            y = y.reshape(-1)
            for p, wt in projs:
                y = y + wt * p * np.vdot(p, v)
            return y

        theta = np.tensordot(a1, a2, axes=(2, 0))
        return matvec, theta, shape

    def sweep(self, direction: str, max_bond: int, cutoff: float, tol: float) -> float:
        n = self.n
        energy = np.inf
        sites = range(n - 1) if direction == "right" else range(n - 2, -1, -1)
        for k in sites:
            matvec, theta, shape = self.local_problem(k)
            energy, vec = _lowest_eig(matvec, theta.reshape(-1), tol)
            u, s, vh, _ = svd_truncate(vec.reshape(shape), 2, max_bond, cutoff)
            s = s / np.linalg.norm(s)
            if direction == "right":
                self.psi.tensors[k] = u
                self.psi.tensors[k + 1] = s[:, None, None] * vh
                self.psi.center = k + 1
                self._build_left(k)
            else:
                self.psi.tensors[k] = u * s
                self.psi.tensors[k + 1] = vh
                self.psi.center = k
                self._build_right(k + 1)
        return float(energy)


def _lowest_eig(matvec, v0, tol):
    dim = v0.size
    if dim <= _DENSE_LIMIT:
        m = np.empty((dim, dim), dtype=complex)
        eye = np.eye(dim, dtype=complex)
        for j in range(dim):
            m[:, j] = matvec(eye[:, j])
        m = 0.5 * (m + m.conj().T)
        e, v = np.linalg.eigh(m)
        return e[0], v[:, 0]
    op = LinearOperator((dim, dim), matvec=matvec, dtype=complex)
    v0 = v0.astype(complex)
    if not np.any(v0):
        v0 = np.ones(dim, dtype=complex)
    try:
        e, v = eigsh(op, k=1, which="SA", v0=v0, tol=tol, ncv=min(dim - 1, 20), maxiter=2000)
    except ArpackNoConvergence as exc:
        if len(exc.eigenvalues) == 0:
            raise
        e, v = exc.eigenvalues, exc.eigenvectors
    return e[0], v[:, 0]


def _variance(h: MPO, psi: MPS, e: float) -> float:
    hpsi = mpo_apply(h, psi, cutoff=0.0)
    return float(np.real(inner(hpsi, hpsi)) - e * e)


def _check_hermitian(h: MPO, rng: np.random.Generator, tol: float = 1e-8) -> None:
    for _ in range(2):
        s = MPS.random(h.nsites, 2, rng)
        ev = expval(s, h)
        if abs(ev.imag) > tol * max(1.0, abs(ev.real)):
            raise ValidationError("Hamiltonian MPO is not Hermitian (complex expectation value)")


def _run(h: MPO, cfg: DmrgConfig, penalties, initial: MPS | None) -> DmrgResult:
    rng = np.random.default_rng(cfg.seed)
    _check_hermitian(h, rng)
    psi = initial.copy() if initial is not None else MPS.random(h.nsites, min(cfg.init_bond, cfg.max_bond), rng)
    psi.normalize()
    if h.nsites == 1:
        m = h.tensors[0][0, :, :, 0]
        for g, wt in penalties:
            v = g.tensors[0].reshape(-1)
            m = m + wt * np.outer(v, v.conj())
        e, v = np.linalg.eigh(0.5 * (m + m.conj().T))
        st = MPS([v[:, 0].reshape(1, -1, 1)], center=0)
        e0 = float(np.real(expval(st, h)))
        return DmrgResult(e0, st, _variance(h, st, e0), True, [e0])
    sw = _Sweeper(h, psi, penalties)
    energies: list[float] = []
    converged = False
    for i in range(cfg.sweeps):
        sw.sweep("right", cfg.max_bond, cfg.cutoff, cfg.local_tol)
        e = sw.sweep("left", cfg.max_bond, cfg.cutoff, cfg.local_tol)
        energies.append(e)
        if i > 0 and abs(energies[-2] - e) < cfg.convergence_tol * max(1.0, abs(e)):
            converged = True
            break
    state = sw.psi
    state.normalize()
    e_h = float(np.real(expval(state, h)))
    return DmrgResult(e_h, state, _variance(h, state, e_h), converged, energies)


def ground_state(h: MPO, cfg: DmrgConfig | None = None, initial: MPS | None = None) -> DmrgResult:
    """Lowest eigenpair of a Hermitian MPO.

    The returned energy is ``<psi|H|psi>`` of the final normalized state; the
    per-sweep energies of the local problems are kept in ``sweep_energies``.
    """
    cfg = cfg or DmrgConfig()
    return _run(h, cfg, [], initial)


def _norm_estimate(h: MPO) -> float:
    return h.frobenius_norm() / np.sqrt(2.0**h.nsites)


def first_excited(h: MPO, gs: MPS, cfg: DmrgConfig | None = None, initial: MPS | None = None) -> DmrgResult:
    """First excited state via a projector penalty ``w |gs><gs|``."""
    cfg = cfg or DmrgConfig()
    if abs(gs.norm() - 1.0) > 1e-8:
        raise ValidationError("ground state must be normalized")
    w = cfg.penalty_weight if cfg.penalty_weight is not None else 10.0 * max(1.0, _norm_estimate(h))
    g = gs.copy()
    res = _run(h, cfg, [(g, w)], initial)
    return res


def gap_scan(
    hbuilder: Callable[[float], MPO],
    points: int,
    cfg: DmrgConfig | None = None,
    lam_range: tuple[float, float] = (0.0, 1.0),
) -> list[dict]:
    """Ground/first-excited energies on a uniform grid of the adiabatic parameter."""
    if points < 2:
        raise ValueError("points must be >= 2")
    cfg = cfg or DmrgConfig()
    rows = []
    prev_gs = prev_ex = None
    for lam in np.linspace(lam_range[0], lam_range[1], points):
        h = hbuilder(float(lam))
        r0 = ground_state(h, cfg, initial=prev_gs)
        r1 = first_excited(h, r0.state, cfg, initial=prev_ex)
        rows.append(
            {
                "lambda": float(lam),
                "gap": r1.energy - r0.energy,
                "e0": r0.energy,
                "e1": r1.energy,
                "converged": bool(r0.converged and r1.converged),
            }
        )
        prev_gs, prev_ex = r0.state, r1.state
    return rows


def write_gap_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["lambda", "gap", "e0", "e1", "converged"])
        for r in rows:
            wr.writerow([repr(r["lambda"]), repr(r["gap"]), repr(r["e0"]), repr(r["e1"]), str(r["converged"]).lower()])
