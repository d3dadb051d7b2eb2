"""Adiabatic gauge potentials: variational MPO solver, nested commutators, quality metrics.

Operators are handled through their vectorization ``|A>`` (an MPS with
physical dimension 4, index ``out * 2 + in``). On that space the commutator
with ``H`` is the superoperator ``L = H (x) 1 - 1 (x) H^T`` and the gauge
potential equation ``[H, A] = -i dH`` reads ``L |A> = -i |dH>``. The variational
solver minimizes ``||L|A> + i|dH>||^2 + eta ||A||^2`` over MPOs of fixed bond
dimension by alternating single-site solves of the regularized normal
equations ``(L^2 + eta) x = L b``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from .errors import DivergenceError, ResourceError, UndefinedMetricError, ValidationError
from .mps import DEFAULT_CUTOFF, MPO, MPS, _apply_exact, _capped_bonds, _mul_exact, inner, mpo_add, mpo_trace_product, mps_add
from .operators import mpo_from_pauli_sum
from .pauli import PauliSum, commutator
from .tensor import solve_regularized

__all__ = [
    "AGPSolverConfig",
    "AGPSolution",
    "slice_agps",
    "NCAnsatz",
    "left_superop",
    "right_superop",
    "liouvillian",
    "solve_variational_agp",
    "normalized_cost",
    "normalized_error",
    "fit_nc_coefficients",
    "nc_to_mpo",
    "write_sweep_csv",
]

log = logging.getLogger(__name__)

_HERMITIAN_TOL = 1e-10


# ---------------------------------------------------------------------------
# superoperators on vectorized operators


def left_superop(x: MPO) -> MPO:
    """MPO on the doubled space implementing ``|A> -> |X A>``."""
    ts = []
    for t in x.tensors:
        d = t.shape[1]
        w = np.einsum("aopr,iq->aoipqr", t, np.eye(d, dtype=t.dtype))
        ts.append(w.reshape(t.shape[0], d * d, d * d, t.shape[3]))
    return MPO(ts)


def right_superop(x: MPO) -> MPO:
    """MPO on the doubled space implementing ``|A> -> |A X>``."""
    ts = []
    for t in x.tensors:
        d = t.shape[1]
        # (A X)_{o i} = sum_q A_{o q} X_{q i}
        w = np.einsum("op,aqir->aoipqr", np.eye(d, dtype=t.dtype), t)
        ts.append(w.reshape(t.shape[0], d * d, d * d, t.shape[3]))
    return MPO(ts)


def liouvillian(h: MPO, cutoff: float = DEFAULT_CUTOFF) -> MPO:
    """``L = H (x) 1 - 1 (x) H^T``, so that ``L|A> = |[H, A]>``."""
    return mpo_add(left_superop(h), right_superop(h).scale(-1.0)).compress(cutoff=cutoff)


# ---------------------------------------------------------------------------
# metrics


def _vec(a: MPO) -> MPS:
    return a.to_mps()


def _g_vector(a: MPO, h: MPO, dh: MPO, lv: MPO | None = None) -> MPS:
    # |G> = |dH> + i|[A, H]> = |dH> - i L|A>
    lv = lv if lv is not None else liouvillian(h)
    return mps_add(_vec(dh), _apply_exact(lv, _vec(a)).scale(-1j))


def _dh_norm2(dh: MPO) -> float:
    v = _vec(dh)
    return float(np.real(inner(v, v)))


def _check_sizes(*ops: MPO) -> None:
    n = ops[0].nsites
    if any(o.nsites != n for o in ops):
        raise ValidationError("operators act on different numbers of sites")


def normalized_cost(a: MPO, h: MPO, dh: MPO) -> float:
    """``tr[G^dag G] / tr[dH^2]`` with ``G = dH + i[A, H]``, contracted exactly."""
    _check_sizes(a, h, dh)
    den = _dh_norm2(dh)
    if den == 0.0:
        raise UndefinedMetricError("tr[dH^2] = 0: normalized cost is undefined")
    g = _g_vector(a, h, dh)
    return float(np.real(inner(g, g))) / den


def normalized_error(a: MPO, h: MPO, dh: MPO) -> float:
    """``tr[[G,H]^dag [G,H]] / tr[dH^2]``, contracted exactly."""
    _check_sizes(a, h, dh)
    den = _dh_norm2(dh)
    if den == 0.0:
        raise UndefinedMetricError("tr[dH^2] = 0: normalized error is undefined")
    lv = liouvillian(h)
    g = _g_vector(a, h, dh, lv)
    lg = _apply_exact(lv, g)
    return float(np.real(inner(lg, lg))) / den


# ---------------------------------------------------------------------------
# variational solver


@dataclass
class AGPSolverConfig:
    """Settings for :func:`solve_variational_agp`.

    Attributes:
        chi: MPO bond dimension of the ansatz.
        eta: Regularization added to every local normal-equation matrix.
        sweeps: Maximum number of full (right then left) sweeps.
        init: ``"zero-perturbed"`` (random tensors of size ``init_scale``) or
            ``"previous-solution"`` (warm start from the ``initial`` argument).
        tol: Stop when a full sweep lowers the objective by less than this
            fraction of its magnitude.
        seed: Seed for the random initial tensors.
        dense_local_max: Largest local problem solved by a dense factorization;
            bigger ones use warm-started conjugate gradients on the environment matvec.
    """

    chi: int = 8
    eta: float = 1e-6
    sweeps: int = 10
    init: str = "zero-perturbed"
    tol: float = 1e-9
    seed: int = 7
    init_scale: float = 1e-3
    sym_penalty: float = 1.0
    dense_local_max: int = 1024
    cg_rtol: float = 1e-10
    cg_maxiter: int = 200

    def __post_init__(self) -> None:
        if self.chi < 1:
            raise ValueError("chi must be >= 1")
        if not (self.eta >= 0 and np.isfinite(self.eta)):
            raise ValueError("eta must be finite and >= 0")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.init not in ("zero-perturbed", "previous-solution"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class AGPSolution:
    """Result of a variational solve.

    ``objective`` holds the regularized objective (up to the constant
    ``||dH||^2``) after every local solve; it is nonincreasing.
    """

    a_tilde: MPO
    chi: int
    eta: float
    normalized_cost: float
    normalized_error: float
    hermitian_defect: float
    sweeps_done: int = 0
    converged: bool = False
    undefined_metric: bool = False
    objective: list[float] = field(default_factory=list)


def _envs_left(env, x, w):
    # env (a, w, b) with bra bond a (conj x), ket bond b
    t = np.tensordot(env, x.conj(), axes=(0, 0))  # (w, b, s, c)
    t = np.tensordot(t, w, axes=([0, 2], [0, 1]))  # (b, c, t, v)
    return np.tensordot(t, x, axes=([0, 2], [0, 1]))  # (c, v, d)


def _envs_right(env, x, w):
    t = np.tensordot(x.conj(), env, axes=(2, 0))  # (a, s, v, d)
    t = np.tensordot(t, w, axes=([1, 2], [1, 3]))  # (a, d, w, t)
    return np.tensordot(t, x, axes=([1, 3], [2, 1]))  # (a, w, b)


def _ov_left(env, x, c):
    # env (a, g): conj(x) bond a, c bond g
    t = np.tensordot(env, x.conj(), axes=(0, 0))  # (g, s, a')
    return np.tensordot(t, c, axes=([0, 1], [0, 1]))  # (a', g')


def _ov_right(env, x, c):
    t = np.tensordot(x.conj(), env, axes=(2, 0))  # (a, s, g)
    return np.tensordot(t, c, axes=([1, 2], [1, 2]))  # (a, g)


class _ALS:
    """Single-site alternating least squares for ``(K + eta) x = c`` on an MPS."""

    def __init__(self, k: MPO, c: MPS, x: MPS, eta: float, dense_max: int = 1024, cg_rtol: float = 1e-10, cg_maxiter: int = 200):
        self.k, self.c, self.x, self.eta = k, c, x, eta
        self.dense_max, self.cg_rtol, self.cg_maxiter = dense_max, cg_rtol, cg_maxiter
        n = x.nsites
        self.n = n
        dt = x.tensors[0].dtype
        self.LK = [None] * (n + 1)
        self.RK = [None] * (n + 1)
        self.LC = [None] * (n + 1)
        self.RC = [None] * (n + 1)
        self.LK[0] = np.ones((1, 1, 1), dtype=dt)
        self.RK[n] = np.ones((1, 1, 1), dtype=dt)
        self.LC[0] = np.ones((1, 1), dtype=dt)
        self.RC[n] = np.ones((1, 1), dtype=dt)
        x.canonicalize(0)
        for j in range(n - 1, 0, -1):
            self._right(j)

    def _left(self, j):
        t = self.x.tensors[j]
        self.LK[j + 1] = _envs_left(self.LK[j], t, self.k.tensors[j])
        self.LC[j + 1] = _ov_left(self.LC[j], t, self.c.tensors[j])

    def _right(self, j):
        t = self.x.tensors[j]
        self.RK[j] = _envs_right(self.RK[j + 1], t, self.k.tensors[j])
        self.RC[j] = _ov_right(self.RC[j + 1], t, self.c.tensors[j])

    def _matvec(self, j, v):
        le, re, w = self.LK[j], self.RK[j + 1], self.k.tensors[j]
        t = np.tensordot(le, v, axes=(2, 0))  # (a, w, t, d)
        t = np.tensordot(t, w, axes=([1, 2], [0, 2]))  # (a, d, s, v)
        return np.tensordot(t, re, axes=([1, 3], [2, 1]))  # (a, s, c)

    def local_solve(self, j) -> float:
        shape = self.x.tensors[j].shape
        dim = int(np.prod(shape))
        rhs = np.tensordot(self.LC[j], self.c.tensors[j], axes=(1, 0))  # (a, s, h)
        rhs = np.tensordot(rhs, self.RC[j + 1], axes=(2, 1)).reshape(-1)  # (a, s, c)
        if dim <= self.dense_max:
            le, re, w = self.LK[j], self.RK[j + 1], self.k.tensors[j]
            m = np.tensordot(le, w, axes=(1, 0))  # (a, b, s, t, v)
            m = np.tensordot(m, re, axes=(4, 1))  # (a, b, s, t, c, d)
            m = m.transpose(0, 2, 4, 1, 3, 5).reshape(dim, dim)
            m = 0.5 * (m + m.conj().T)
            v = solve_regularized(m, rhs, self.eta, hermitian=True)
            # at the local optimum x^dag (K + eta) x = x^dag c, so f = -Re x^dag c
            f = -float(np.real(np.vdot(v, rhs)))
        else:
            op = spla.LinearOperator(
                (dim, dim),
                matvec=lambda y: self._matvec(j, y.reshape(shape)).reshape(-1) + self.eta * y,
                dtype=self.x.tensors[j].dtype,
            )
            # CG started from the current tensor never raises the local objective
            x0 = self.x.tensors[j].reshape(-1)
            v, _ = spla.cg(op, rhs, x0=x0, rtol=self.cg_rtol, maxiter=self.cg_maxiter)
            f = float(np.real(np.vdot(v, op.matvec(v)))) - 2.0 * float(np.real(np.vdot(v, rhs)))
            f0 = float(np.real(np.vdot(x0, op.matvec(x0)))) - 2.0 * float(np.real(np.vdot(x0, rhs)))
            if f > f0:
                v, f = x0, f0
        self.x.tensors[j] = v.reshape(shape)
        return f

    def sweep(self, objective: list[float], slack: float) -> None:
        n = self.n
        order = list(range(n - 1)) + list(range(n - 1, 0, -1))
        directions = ["right"] * (n - 1) + ["left"] * (n - 1)
        if n == 1:
            order, directions = [0], ["none"]
        for j, dirn in zip(order, directions):
            f = self.local_solve(j)
            if objective:
                prev = objective[-1]
                scale = max(abs(prev), abs(f), 1e-300)
                if f - prev > 1e-6 * scale:
                    raise DivergenceError(
                        f"objective increased from {prev:.6e} to {f:.6e} at site {j}"
                    )
                if f - prev > slack * max(1.0, scale):
                    log.warning("local objective rose by %.3e at site %d", f - prev, j)
            objective.append(f)
            if dirn == "right":
                self.x._move_right(j)
                self.x.center = j + 1
                self._left(j)
            elif dirn == "left":
                self.x._move_left(j)
                self.x.center = j - 1
                self._right(j)


def _symmetric_projector(n: int) -> MPO:
    """``(1 + T) / 2`` on vectorized operators, where ``T|A> = |A^T>``."""
    swap = np.zeros((4, 4))
    for o in range(2):
        for i in range(2):
            swap[2 * o + i, 2 * i + o] = 1.0
    ident = MPO([np.eye(4).reshape(1, 4, 4, 1) * (0.5 if k == 0 else 1.0) for k in range(n)])
    tr = MPO([swap.reshape(1, 4, 4, 1) * (0.5 if k == 0 else 1.0) for k in range(n)])
    return mpo_add(ident, tr)


def _is_real(*ops: MPO) -> bool:
    return all(not np.iscomplexobj(t) or not np.any(t.imag) for o in ops for t in o.tensors)


def _as_real(o: MPO) -> MPO:
    return MPO([np.ascontiguousarray(np.real(t)) for t in o.tensors])


def _pad_to(x: MPS, dims: list[int], rng, scale: float) -> MPS:
    ts = []
    for k, t in enumerate(x.tensors):
        l, d, r = t.shape
        nl, nr = max(l, dims[k]), max(r, dims[k + 1])
        z = np.zeros((nl, d, nr), dtype=t.dtype)
        if scale:
            z += scale * rng.normal(size=z.shape)
        z[:l, :, :r] = t
        ts.append(z)
    return MPS(ts)


def _initial_vector(cfg: AGPSolverConfig, n: int, real: bool, initial: MPO | None, rng) -> MPS:
    dims = _capped_bonds(n, cfg.chi, 4)
    if initial is not None:
        x = initial.to_mps()
        if real:
            # the real path solves for B with A = iB
            x = MPS([np.real(t * -1j) if k == 0 else np.real(t) for k, t in enumerate(x.tensors)])
        else:
            x = MPS([t.astype(complex) for t in x.tensors])
        if x.max_bond() > cfg.chi:
            x.compress(max_bond=cfg.chi)
        return _pad_to(x, dims, rng, 0.0)
    ts = []
    for k in range(n):
        shp = (dims[k], 4, dims[k + 1])
        t = rng.normal(size=shp)
        if not real:
            t = t + 1j * rng.normal(size=shp)
        ts.append(cfg.init_scale * t)
    return MPS(ts)


def solve_variational_agp(h: MPO, dh: MPO, cfg: AGPSolverConfig | None = None, initial: MPO | None = None) -> AGPSolution:
    """Variational MPO approximation of the gauge potential of ``H`` for ``dH``.

    Args:
        h: Hermitian Hamiltonian MPO.
        dh: Derivative of the Hamiltonian along the path.
        cfg: Solver settings.
        initial: Warm start (used when ``cfg.init == "previous-solution"``).
            Its bond dimension is padded with zeros up to ``cfg.chi``.

    Returns:
        The solution with exact normalized cost, error and Hermitian defect.

    Raises:
        ValidationError: If ``h`` is not Hermitian or sizes differ.
        DivergenceError: If a local solve increases the objective.
    """
    cfg = cfg or AGPSolverConfig()
    _check_sizes(h, dh)
    n = h.nsites
    if h.hermitian_defect() > _HERMITIAN_TOL:
        raise ValidationError("Hamiltonian MPO is not Hermitian")
    if _dh_norm2(dh) == 0.0:
        return AGPSolution(MPO.zero(n), cfg.chi, cfg.eta, 0.0, 0.0, 0.0, undefined_metric=True)

    real = _is_real(h, dh)
    hh, dd = (_as_real(h), _as_real(dh)) if real else (h, dh)
    lv = liouvillian(hh)
    kk = _mul_exact(lv, lv).compress(cutoff=DEFAULT_CUTOFF)
    if real and cfg.sym_penalty > 0:
        # For real symmetric H the transpose of a solution B is minus a solution,
        # so the symmetric part of B lies in the null space of L. Penalizing it
        # leaves the regularized minimizer unchanged and removes null-space drift.
        mu = float(np.real(mpo_trace_product([kk]))) / 4.0**n
        kk = mpo_add(kk, _symmetric_projector(n).scale(cfg.sym_penalty * mu)).compress(cutoff=DEFAULT_CUTOFF)
    ldh = _apply_exact(lv, dd.to_mps())
    ldh.compress()
    # real: (K + eta) B = -L dH with A = iB; complex: (K + eta) A = L(-i dH)
    c = ldh.scale(-1.0) if real else ldh.scale(-1j)

    rng = np.random.default_rng(cfg.seed)
    use_init = initial if cfg.init == "previous-solution" else None
    x = _initial_vector(cfg, n, real, use_init, rng)

    als = _ALS(kk, c, x, cfg.eta, cfg.dense_local_max, cfg.cg_rtol, cfg.cg_maxiter)
    objective: list[float] = []
    converged = False
    done = 0
    for i in range(cfg.sweeps):
        start = objective[-1] if objective else None
        als.sweep(objective, 1e-10)
        done = i + 1
        if start is not None and abs(start - objective[-1]) <= cfg.tol * max(abs(objective[-1]), 1e-300):
            converged = True
            break

    xs = als.x
    ts = [t.reshape(t.shape[0], 2, 2, t.shape[2]) for t in xs.tensors]
    if real:
        ts = [t.astype(complex) for t in ts]
        ts[0] = 1j * ts[0]
    a = MPO(ts)
    return AGPSolution(
        a_tilde=a,
        chi=cfg.chi,
        eta=cfg.eta,
        normalized_cost=normalized_cost(a, h, dh),
        normalized_error=normalized_error(a, h, dh),
        hermitian_defect=a.hermitian_defect(),
        sweeps_done=done,
        converged=converged,
        objective=objective,
    )


def slice_agps(problem, sched, cfg: AGPSolverConfig | None = None, warm_start: bool = True) -> list[AGPSolution]:
    """Variational gauge potential at every slice midpoint of ``sched``.

    Slices are solved in order; with ``warm_start`` each solve starts from the
    previous slice's solution.
    """
    cfg = cfg or AGPSolverConfig()
    dh = problem.dh()
    out: list[AGPSolution] = []
    prev = None
    for _, lam, _ in sched.slice_midpoints():
        c = replace(cfg, init="previous-solution") if (warm_start and prev is not None) else cfg
        sol = solve_variational_agp(problem.hamiltonian(lam), dh, c, initial=prev)
        out.append(sol)
        prev = sol.a_tilde
    return out


def write_sweep_csv(rows: list[dict], path: str | Path) -> None:
    """CSV with columns ``chi,eta,cost,error,hermitian_defect``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["chi", "eta", "cost", "error", "hermitian_defect"])
        for r in rows:
            wr.writerow([r["chi"], repr(float(r["eta"])), repr(float(r["cost"])), repr(float(r["error"])), repr(float(r["hermitian_defect"]))])


# ---------------------------------------------------------------------------
# nested commutators


@dataclass
class NCAnsatz:
    """``A_NC = i sum_k alpha_k O_{2k-1}`` with ``O_j = [H, O_{j-1}]``, ``O_0 = dH``.

    Attributes:
        order: Number of retained commutators ``l``.
        alphas: Real prefactors.
        basis: The odd nested commutators ``O_1, O_3, ..., O_{2l-1}``.
        h, dh: Hamiltonian and its derivative the basis was built from.
        normalized_cost, normalized_error: Exact values for the fitted ansatz.
        singular: Set when the normal equations were rank deficient.
    """

    order: int
    alphas: np.ndarray
    basis: list[PauliSum]
    h: PauliSum
    dh: PauliSum
    normalized_cost: float = float("nan")
    normalized_error: float = float("nan")
    singular: bool = False

    def __post_init__(self) -> None:
        self.alphas = np.asarray(self.alphas, dtype=float)
        if len(self.basis) != self.order or len(self.alphas) != self.order:
            raise ValueError("basis and alphas must both have length equal to order")

    def operator(self) -> PauliSum:
        """The ansatz as a Pauli sum."""
        acc = PauliSum.zero(self.h.nsites)
        for a, o in zip(self.alphas, self.basis):
            if a != 0.0:
                acc = acc + o * (1j * a)
        return acc.simplify()


def _gram_mpo(ops: list[PauliSum]) -> np.ndarray:
    mpos = [mpo_from_pauli_sum(o) for o in ops]
    n = len(ops)
    out = np.zeros((n, n))
    norm = 2.0 ** ops[0].nsites
    for i in range(n):
        for j in range(i, n):
            v = mpo_trace_product([mpos[i].dagger(), mpos[j]]).real / norm
            out[i, j] = out[j, i] = v
    return out


def fit_nc_coefficients(
    h: PauliSum,
    dh: PauliSum,
    order: int,
    method: str = "pauli",
    alphas: np.ndarray | None = None,
    term_cap: int = 5_000_000,
) -> NCAnsatz:
    """Fit the prefactors of the order-``l`` nested-commutator ansatz.

    With ``O_j = ad_H^j dH`` one has ``i[A_NC, H] = sum_k alpha_k O_{2k}``, so
    the cost ``||dH + sum_k alpha_k O_{2k}||^2`` is quadratic in ``alpha`` and
    its minimizer solves an ``l x l`` system of Hilbert-Schmidt inner products.

    Args:
        h, dh: Hamiltonian and derivative as Pauli sums.
        order: ``l >= 1``.
        method: ``"pauli"`` evaluates the traces from Pauli coefficients,
            ``"mpo"`` by MPO trace contractions of the basis operators.
        alphas: Use these prefactors instead of fitting (for comparisons).
        term_cap: Resource cap on nested-commutator term counts.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if h.nsites != dh.nsites:
        raise ValidationError("size mismatch")
    ops = [dh.simplify()]
    for _ in range(2 * order + 1):
        ops.append(commutator(h, ops[-1], term_cap=term_cap))
    even = [ops[2 * k] for k in range(1, order + 1)]
    dh2 = dh.norm2()
    singular = False
    if alphas is None:
        if method == "pauli":
            gram = np.array([[np.real(a.inner(b)) for b in even] for a in even])
        elif method == "mpo":
            gram = _gram_mpo(even)
        else:
            raise ValueError(f"unknown method {method!r}")
        rhs = -np.array([np.real(o.inner(dh)) for o in even])
        # diagonal scaling keeps the system well conditioned across orders
        scale = np.sqrt(np.clip(np.diag(gram), 0.0, None))
        live = scale > 1e-14 * max(1.0, np.sqrt(dh2))
        alphas = np.zeros(order)
        if np.any(live):
            g = gram[np.ix_(live, live)] / np.outer(scale[live], scale[live])
            r = rhs[live] / scale[live]
            beta, _, rank, _ = np.linalg.lstsq(g, r, rcond=1e-13)
            singular = rank < int(live.sum())
            alphas[live] = beta / scale[live]
        singular = singular or not np.all(live)
    else:
        alphas = np.asarray(alphas, dtype=float)
        if alphas.shape != (order,):
            raise ValueError("alphas has the wrong length")
    g_op = dh
    err_op = ops[1]
    for k in range(1, order + 1):
        g_op = g_op + ops[2 * k] * alphas[k - 1]
        err_op = err_op + ops[2 * k + 1] * alphas[k - 1]
    cost = g_op.norm2() / dh2 if dh2 > 0 else 0.0
    error = err_op.norm2() / dh2 if dh2 > 0 else 0.0
    basis = [ops[2 * k - 1] for k in range(1, order + 1)]
    if singular:
        log.warning("nested-commutator normal equations are singular; using the minimum-norm solution")
    return NCAnsatz(order, alphas, basis, h, dh, float(cost), float(error), singular)


def nc_to_mpo(
    ansatz: NCAnsatz,
    route: str = "pauli-strings",
    cutoff: float = DEFAULT_CUTOFF,
    bond_cap: int = 4096,
) -> tuple[MPO, int]:
    """MPO of the nested-commutator ansatz and its maximum bond dimension.

    ``"pauli-strings"`` sums the simplified Pauli strings of the ansatz and
    compresses; ``"mpo-arithmetic"`` evaluates the commutators by MPO products
    and sums of the MPOs of ``H`` and ``dH``, compressing after each step.

    Raises:
        ResourceError: If an intermediate bond exceeds ``bond_cap``.
    """
    n = ansatz.h.nsites
    if not np.any(ansatz.alphas) or all(len(b) == 0 for b in ansatz.basis):
        return MPO.zero(n), 1
    if route == "pauli-strings":
        a = mpo_from_pauli_sum(ansatz.operator(), cutoff=cutoff)
    elif route == "mpo-arithmetic":
        hm = mpo_from_pauli_sum(ansatz.h, cutoff=cutoff)
        o = mpo_from_pauli_sum(ansatz.dh, cutoff=cutoff)
        a = None
        for k in range(1, 2 * ansatz.order):
            o = mpo_add(_mul_exact(hm, o), _mul_exact(o, hm).scale(-1.0)).compress(cutoff=cutoff)
            if o.max_bond() > bond_cap:
                raise ResourceError(f"nested commutator bond {o.max_bond()} exceeds cap {bond_cap}")
            if k % 2 == 1:
                term = o.scale(1j * ansatz.alphas[(k - 1) // 2])
                a = term if a is None else mpo_add(a, term).compress(cutoff=cutoff)
    else:
        raise ValueError(f"unknown route {route!r}")
    if a.max_bond() > bond_cap:
        raise ResourceError(f"ansatz bond {a.max_bond()} exceeds cap {bond_cap}")
    return a, a.max_bond()
