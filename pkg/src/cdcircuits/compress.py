"""Slice-by-slice circuit compression of (counterdiabatic) adiabatic evolution.

For slice ``q`` of chunk ``m`` the chunk circuit ``U(theta)`` is fitted to
``(W_q - i tau lam_dot_q A_q) U(theta_{q-1})`` acting on ``rho``, where ``W_q``
is a short-time propagator of ``H(lam_q)`` and ``A_q`` an approximate gauge
potential. Parameters are warm-started from the previous slice; a chunk's
circuit is frozen after its last slice and the next chunk starts from the
identity.
"""

from __future__ import annotations

import csv
import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import line_search
from scipy.optimize._linesearch import LineSearchWarning

from .circuit import (
    Block,
    Circuit,
    CircuitLayout,
    apply_circuit,
    apply_circuit_dense,
    build_brickwork,
    build_chunk,
    cost_and_gradient,
    zxz_angles,
)
from .errors import DivergenceError
from .metrics import GroundStates, energy, energy_errors, instantaneous_infidelity, target_fidelity
from .mps import MPO, MPS, mpo_add, mpo_apply, mpo_apply_dense, mpo_mpo_mul
from .oracle import ising_dense
from .operators import IsingParams, single_qubit_exp, taylor_propagator, trotter2_propagator
from .schedule import Schedule

__all__ = [
    "OptimizerConfig",
    "LbfgsResult",
    "lbfgs_minimize",
    "identity_theta",
    "CompressionRun",
    "compress_chunks",
    "slice_operator",
    "trotter_adiabatic_circuit",
    "write_run",
    "SLICE_COLUMNS",
]

log = logging.getLogger(__name__)

SLICE_COLUMNS = ("slice", "t", "lambda", "cost", "fid_target", "e_inst", "e_targ")


# optimizer ------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    """L-BFGS settings; ``c1``/``c2`` are the strong-Wolfe constants.

    With ``carry_memory`` the curvature pairs of one slice seed the next
    slice's optimizer within a chunk (the start point is still the previous
    optimum; only the inverse-Hessian model is reused).
    """

    Q: int = 100
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    grad_tol: float = 1e-8
    max_ls_iter: int = 30
    carry_memory: bool = False

    def __post_init__(self) -> None:
        if self.Q < 1:
            raise ValueError("Q must be >= 1")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")


@dataclass
class LbfgsResult:
    x: np.ndarray
    cost: float
    iterations: int
    evaluations: int
    reason: str
    trace: list[float] = field(default_factory=list)
    history: tuple[list[np.ndarray], list[np.ndarray]] = field(default_factory=lambda: ([], []))


class _Cached:
    """Memoizes the last ``f(x)`` so the line search can ask for f and g separately."""

    def __init__(self, fun: Callable[[np.ndarray], tuple[float, np.ndarray]]):
        self.fun = fun
        self.x: np.ndarray | None = None
        self.val: tuple[float, np.ndarray] | None = None
        self.calls = 0

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        if self.x is None or not np.array_equal(x, self.x):
            f, g = self.fun(x)
            self.calls += 1
            f = float(f)
            g = np.asarray(g, dtype=float)
            if not (np.isfinite(f) and np.all(np.isfinite(g))):
                raise FloatingPointError("non-finite cost or gradient")
            self.x, self.val = x.copy(), (f, g)
        return self.val

    def f(self, x):
        return self(x)[0]

    def g(self, x):
        return self(x)[1]


def lbfgs_minimize(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    cfg: OptimizerConfig | None = None,
    history: tuple[list[np.ndarray], list[np.ndarray]] | None = None,
) -> LbfgsResult:
    """Limited-memory BFGS with a strong-Wolfe line search.

    ``history`` optionally seeds the curvature pairs ``(s, y)``; the final
    pairs are returned on the result.

    Stops after ``cfg.Q`` iterations, when ``max|g| <= grad_tol``, or when the
    line search fails twice in a row (the second attempt restarts from
    steepest descent). A non-finite evaluation aborts and returns the last
    good iterate with ``reason="non-finite"``.
    """
    cfg = cfg or OptimizerConfig()
    fc = _Cached(fun)
    x = np.array(x0, dtype=float)
    try:
        f, g = fc(x)
    except FloatingPointError as exc:
        raise DivergenceError("objective is not finite at the starting point") from exc
    trace = [f]
    s_hist: list[np.ndarray] = [v.copy() for v in history[0]] if history else []
    y_hist: list[np.ndarray] = [v.copy() for v in history[1]] if history else []
    old_old = f + np.linalg.norm(g) / 2
    it = 0
    reason = "max-iterations"
    while it < cfg.Q:
        if np.max(np.abs(g), initial=0.0) <= cfg.grad_tol:
            reason = "grad-tol"
            break
        p = _two_loop(g, s_hist, y_hist)
        if np.dot(p, g) >= 0:
            s_hist.clear()
            y_hist.clear()
            p = -g
        try:
            res = _wolfe(fc, x, p, g, f, old_old, cfg)
        except FloatingPointError:
            reason = "non-finite"
            break
        alpha = res[0]
        if alpha is None and s_hist:
            # retry once from steepest descent with a fresh memory
            s_hist.clear()
            y_hist.clear()
            p = -g
            try:
                res = _wolfe(fc, x, p, g, f, f + np.linalg.norm(g) / 2, cfg)
            except FloatingPointError:
                reason = "non-finite"
                break
            alpha = res[0]
        if alpha is None:
            reason = "line-search-failure"
            break
        x_new = x + alpha * p
        f_new, g_new = fc(x_new)
        s, y = x_new - x, g_new - g
        if np.dot(s, y) > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > cfg.memory:
                s_hist.pop(0)
                y_hist.pop(0)
        old_old, f, x, g = f, f_new, x_new, g_new
        trace.append(f)
        it += 1
    return LbfgsResult(x, f, it, fc.calls, reason, trace, (s_hist, y_hist))


def _wolfe(fc: _Cached, x, p, g, f, old_old, cfg: OptimizerConfig):
    with warnings.catch_warnings():
        # a failed search is reported through alpha=None and handled by the caller
        warnings.simplefilter("ignore", LineSearchWarning)
        return line_search(fc.f, fc.g, x, p, gfk=g, old_fval=f, old_old_fval=old_old, c1=cfg.c1, c2=cfg.c2, maxiter=cfg.max_ls_iter)


def _two_loop(g: np.ndarray, s_hist: list[np.ndarray], y_hist: list[np.ndarray]) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / np.dot(y, s)
        a = rho * np.dot(s, q)
        alphas.append((rho, a))
        q -= a * y
    if s_hist:
        q *= np.dot(s_hist[-1], y_hist[-1]) / np.dot(y_hist[-1], y_hist[-1])
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


# identity initialization ------------------------------------------------------


def _block_signature(b: Block) -> tuple:
    base = b.sites[0]
    return tuple((g.kind, tuple(s - base for s in g.sites), g.slot is None, g.angle) for g in b.gates)


@lru_cache(maxsize=None)
def _identity_angles(sig: tuple) -> tuple[float, ...]:
    """Angles making a block the identity (up to phase), found once per block structure."""
    from .circuit import Gate

    gates, slot = [], 0
    for kind, rel, fixed, angle in sig:
        if fixed:
            gates.append(Gate(kind, rel, None, angle))
        else:
            gates.append(Gate(kind, rel, slot))
            slot += 1
    nsites = 1 + max(max(r) for _, r, _, _ in sig)
    block = Block(tuple(range(nsites)), tuple(gates))
    if slot == 0:
        return ()
    dim = 2**nsites

    def f(th):
        u, du = block.unitary(th, with_derivatives=True)
        # maximize |tr U|^2 so the global phase is free
        t = np.trace(u)
        grad = np.zeros(slot)
        for k, d in du:
            grad[k] -= 2 * np.real(np.conj(t) * np.trace(d)) / dim**2
        return -abs(t) ** 2 / dim**2, grad

    zero = np.zeros(slot)
    if f(zero)[0] <= -1 + 1e-14:
        return tuple(zero)
    rng = np.random.default_rng(0)
    best = None
    for _ in range(50):
        r = lbfgs_minimize(f, rng.uniform(-np.pi, np.pi, slot), OptimizerConfig(Q=500, grad_tol=1e-14))
        if best is None or r.cost < best.cost:
            best = r
        if best.cost <= -1 + 1e-14:
            break
    if best.cost > -1 + 1e-12:
        raise DivergenceError(f"could not find identity angles for block (cost {best.cost})")
    return tuple(float(a) for a in best.x)


def identity_theta(c: Circuit) -> np.ndarray:
    """Parameters for which every block of ``c`` is the identity up to a phase.

    All-zero angles already give the identity for rotation-only blocks; blocks
    with CNOTs need a numerical fit, cached per block structure.
    """
    theta = np.zeros(c.num_params)
    for b in c.blocks:
        slots = [g.slot for g in b.gates if g.slot is not None]
        if not slots:
            continue
        ang = _identity_angles(_block_signature(b))
        theta[slots] = ang
    return theta


# compression driver --------------------------------------------------------------


@dataclass
class CompressionRun:
    """Output of :func:`compress_chunks`."""

    circuits: list[Circuit]
    slices: list[dict]
    config: dict
    warnings: list[str] = field(default_factory=list)
    final_state: object = None
    states: list = field(default_factory=list)

    @property
    def costs(self) -> list[float]:
        return [r["cost"] for r in self.slices]


def slice_operator(
    problem,
    lam: float,
    lam_dot: float,
    tau: float,
    agp: MPO | None,
    propagator: str = "taylor1",
    cutoff: float = 1e-14,
    shift: float = 0.0,
) -> MPO:
    """``W - i tau lam_dot A`` for one slice as an MPO.

    ``shift`` replaces ``H`` by ``H - shift`` in ``W``; this only changes the
    global phase of the evolution (and, for Taylor steps, which constant the
    expansion is taken around).
    """
    if propagator in ("taylor1", "taylor2"):
        h = problem.hamiltonian(lam)
        if shift:
            h = mpo_add(h, MPO.identity(problem.nsites).scale(-shift)).compress(cutoff=cutoff)
        w = taylor_propagator(h, tau, order=1 if propagator == "taylor1" else 2)
    elif propagator == "trotter2":
        w = trotter2_propagator(problem.params(lam), tau)
        if shift:
            w = w.scale(np.exp(1j * tau * shift))
    else:
        raise ValueError(f"unknown propagator {propagator!r}")
    if agp is not None and lam_dot != 0.0:
        w = mpo_add(w, agp.scale(-1j * tau * lam_dot)).compress(cutoff=cutoff)
    return w


def _pick_backend(backend: str, n: int, mode: str) -> str:
    if backend != "auto":
        return backend
    if mode == "trace":
        return "dense" if n <= 5 else "mps"
    return "dense" if n <= 12 else "mps"


def compress_chunks(
    sched: Schedule,
    problem,
    agps: Sequence[MPO | None] | None,
    layout: CircuitLayout,
    opt: OptimizerConfig | None = None,
    rho_mode: str = "propagated-state",
    psi0: MPS | np.ndarray | None = None,
    propagator: str = "taylor1",
    backend: str = "auto",
    max_bond: int = 64,
    cutoff: float = 1e-12,
    reference: GroundStates | None = None,
    cost_threshold: float | None = None,
    keep_states: bool = False,
    progress: Callable[[dict], None] | None = None,
    phase_reference: bool = True,
) -> CompressionRun:
    """Optimize one circuit per chunk, slice after slice.

    Args:
        sched: Slicing and chunking of the protocol (``sched.M`` chunks).
        problem: ``AdiabaticProblem`` supplying ``H(lam)``.
        agps: One gauge-potential MPO per slice, or ``None`` for no CD term.
        layout: Circuit layout; one chunk circuit is built from it per chunk.
        opt: L-BFGS settings (``Q`` iterations per slice).
        rho_mode: ``"pure-state"`` (``rho = |psi_i><psi_i|`` for chunk 1 and
            the propagated state afterwards), ``"propagated-state"`` (same
            thing, the default) or ``"trace"`` (``rho = 1`` everywhere).
        psi0: Initial state (MPS or statevector); defaults to the ground state
            of ``H(0)`` from ``reference``.
        propagator: ``"taylor1"``, ``"taylor2"`` or ``"trotter2"``.
        backend: ``"dense"``, ``"mps"`` or ``"auto"``.
        max_bond: Bond cap for targets and MPS gate application.
        cutoff: Relative discarded-weight cutoff for targets and gate splits.
        reference: Ground-state provider for the per-slice metrics
            (``None`` skips the metrics).
        cost_threshold: Flag slices whose final cost exceeds this value.
        keep_states: Keep the state after every slice on the run.
        progress: Called with each slice row.
        phase_reference: In pure-state mode, shift ``H`` by its expectation
            value in the current state before building ``W``. The real-part
            cost is sensitive to the global phase ``exp(-i tau E)``, which
            the circuit would otherwise have to track through its angles.

    Returns:
        The frozen chunk circuits, per-slice rows and run diagnostics.
    """
    opt = opt or OptimizerConfig()
    n = problem.nsites
    if rho_mode not in ("pure-state", "propagated-state", "trace"):
        raise ValueError(f"unknown rho_mode {rho_mode!r}")
    if agps is not None and len(agps) != sched.n_slices:
        raise ValueError(f"need {sched.n_slices} gauge potentials, got {len(agps)}")
    if layout.N != n:
        raise ValueError(f"layout has N={layout.N}, problem has N={n}")
    mode = "trace" if rho_mode == "trace" else "pure-state"
    be = _pick_backend(backend, n, mode)
    if psi0 is None:
        if reference is None:
            reference = GroundStates(problem)
        psi0 = reference(0.0)[1]
    if be == "dense":
        psi = psi0.to_dense() if isinstance(psi0, MPS) else np.asarray(psi0, dtype=complex)
    else:
        psi = psi0 if isinstance(psi0, MPS) else MPS.from_dense(psi0, n, cutoff=1e-16)
        psi = psi.copy()
        psi.canonicalize(0)
    dense_states = be == "dense"

    def apply(c: Circuit, state):
        if dense_states:
            return apply_circuit_dense(c, state)
        return apply_circuit(c, state, max_bond=max_bond, cutoff=cutoff)

    mids = sched.slice_midpoints()
    ends = sched.slice_ends()
    tau = sched.tau
    rows: list[dict] = []
    circuits: list[Circuit] = []
    warnings: list[str] = []
    states = []
    t0 = time.time()
    psi_m = psi
    for m, chunk in enumerate(sched.chunks()):
        circ = build_chunk(layout)
        theta = identity_theta(circ)
        circ = circ.with_theta(theta)
        prev_state = apply(circ, psi_m) if mode == "pure-state" else None
        history = None
        for q in chunk:
            _, lam, ldot = mids[q]
            agp = agps[q] if agps is not None else None
            shift = 0.0
            if mode == "pure-state" and phase_reference:
                hl = ising_dense(problem.params(lam), sparse=True) if dense_states else problem.hamiltonian(lam)
                shift = energy(prev_state, hl)
            wt = slice_operator(problem, lam, ldot, tau, agp, propagator, shift=shift)
            if mode == "pure-state":
                if dense_states:
                    target = mpo_apply_dense(wt, prev_state)
                else:
                    target = mpo_apply(wt, prev_state, max_bond=max_bond, cutoff=cutoff)

                def fun(th, _t=target):
                    return cost_and_gradient(circ.with_theta(th), _t, "pure-state", psi=psi_m, backend=be, max_bond=max_bond, cutoff=cutoff)

            else:
                prev_u = circ
                if be == "dense":
                    from .circuit import circuit_unitary

                    target = wt.to_dense() @ circuit_unitary(prev_u)
                else:
                    u_mpo = apply_circuit(prev_u, MPO.identity(n), max_bond=max_bond, cutoff=cutoff)
                    target = mpo_mpo_mul(wt, u_mpo, max_bond=max_bond, cutoff=cutoff)

                def fun(th, _t=target):
                    return cost_and_gradient(circ.with_theta(th), _t, "trace", backend=be, max_bond=max_bond, cutoff=cutoff)

            res = lbfgs_minimize(fun, circ.theta, opt, history if opt.carry_memory else None)
            history = res.history
            circ = circ.with_theta(res.x)
            if res.reason in ("non-finite",):
                warnings.append(f"slice {q}: optimizer aborted ({res.reason})")
            if cost_threshold is not None and res.cost > cost_threshold:
                warnings.append(f"slice {q}: cost {res.cost:.6g} above threshold {cost_threshold}")
            state = apply(circ, psi_m)
            if mode == "pure-state":
                prev_state = state
            t_end, lam_end = ends[q]
            row = {
                "slice": q + 1,
                "t": t_end,
                "lambda": lam_end,
                "cost": res.cost,
                "cost_start": res.trace[0],
                "iterations": res.iterations,
                "evaluations": res.evaluations,
                "stop": res.reason,
                "chunk": m,
            }
            if reference is not None:
                row.update(_slice_metrics(state, problem, reference, lam_end))
            rows.append(row)
            if keep_states:
                states.append(state)
            if progress is not None:
                progress(row)
        circuits.append(circ)
        psi_m = apply(circ, psi_m)
    config = {
        "T": sched.T,
        "S": sched.S,
        "path": sched.path,
        "M": sched.M,
        "layout": layout.to_json(),
        "optimizer": asdict(opt),
        "rho_mode": rho_mode,
        "propagator": propagator,
        "backend": be,
        "max_bond": max_bond,
        "cutoff": cutoff,
        "cd": agps is not None,
        "phase_reference": phase_reference and mode == "pure-state",
        "seconds": time.time() - t0,
    }
    return CompressionRun(circuits, rows, config, warnings, psi_m, states)


def _slice_metrics(state, problem, reference: GroundStates, lam: float) -> dict:
    ef, psif = reference(1.0)
    es, psis = reference(lam)
    hf, hs = reference.hamiltonian(1.0), reference.hamiltonian(lam)
    if isinstance(state, MPS) and not isinstance(psif, MPS):
        state = state.to_dense()
    if isinstance(psif, MPS) and not isinstance(state, MPS):
        state = MPS.from_dense(state, problem.nsites)
    e_targ, e_inst = energy_errors(state, hf, psif, hs, psis)
    return {
        "fid_target": target_fidelity(state, psif),
        "e_inst": e_inst,
        "e_targ": e_targ,
        "inst_infidelity": instantaneous_infidelity(state, psis),
    }


def write_run(run: CompressionRun, out_dir: str | Path, prefix: str = "run") -> tuple[Path, Path]:
    """Write ``<prefix>.json`` (config, per-slice cost, final theta per chunk) and ``<prefix>.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec = {
        "config": run.config,
        "warnings": run.warnings,
        "cost": [r["cost"] for r in run.slices],
        "iterations": [r["iterations"] for r in run.slices],
        "circuits": [c.to_json() for c in run.circuits],
        "slices": [{k: v for k, v in r.items()} for r in run.slices],
    }
    jp = out / f"{prefix}.json"
    jp.write_text(json.dumps(rec, indent=1, default=float))
    cp = out / f"{prefix}.csv"
    with cp.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SLICE_COLUMNS)
        for r in run.slices:
            w.writerow([r["slice"]] + [_fmt(r.get(k, float("nan"))) for k in SLICE_COLUMNS[1:]])
    return jp, cp


def _fmt(x) -> str:
    return f"{float(x):.12g}"


# Trotter baseline -----------------------------------------------------------------


def trotter_adiabatic_circuit(
    T: float,
    R: int,
    pbuilder: Callable[[float], IsingParams],
    path: str = "sin2",
) -> Circuit:
    """Second-order Trotter circuit of the adiabatic path with ``R`` chunks.

    Chunk ``r`` uses ``H(lam(t_r))`` at its midpoint ``t_r`` and step
    ``tau = T / R``. The circuit uses the brickwork layout with ``L = R``: the
    initial single-qubit layer holds the first half step of the fields,
    bricks hold ``Uzz(2 tau J_k)``, and the rotation after a qubit's last
    brick in layer ``r`` merges the closing half step of chunk ``r`` with the
    opening half step of chunk ``r + 1``. All other rotations are zero.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    sched = Schedule(T, R / T, path)
    lams = [lam for _, lam, _ in sched.slice_midpoints()]
    params = [pbuilder(lam) for lam in lams]
    n = params[0].nsites
    tau = T / R
    circ = build_brickwork(n, R, 1)
    theta = np.zeros(circ.num_params)

    def half(p: IsingParams, q: int) -> np.ndarray:
        return single_qubit_exp(p.g[q], p.h[q], tau / 2)

    def set_zxz(gates, u):
        slots = [g.slot for g in gates]
        theta[slots] = zxz_angles(u)

    blocks = iter(circ.blocks)
    for q in range(n):
        b = next(blocks)
        set_zxz(b.gates, half(params[0], q))
    pairs_per_layer = n - 1
    for r in range(R):
        layer = [next(blocks) for _ in range(pairs_per_layer)]
        last = {}
        for idx, b in enumerate(layer):
            for q in b.sites:
                last[q] = idx
        for idx, b in enumerate(layer):
            a, c = b.sites
            uzz = b.gates[0]
            theta[uzz.slot] = 2 * tau * params[r].J[a]
            for q, gates in ((a, b.gates[1:4]), (c, b.gates[4:7])):
                if last[q] != idx:
                    continue
                u = half(params[r], q)
                if r + 1 < R:
                    u = half(params[r + 1], q) @ u
                set_zxz(gates, u)
    return circ.with_theta(theta)
