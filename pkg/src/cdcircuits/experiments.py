"""Experiment recipes, configuration, result persistence and plot rendering.

Every recipe writes fixed-schema CSV tables into its output directory plus a
``manifest.json`` (config, config hash, package versions, wall time, summary)
and SVG plots rendered from the CSVs. CSV files contain no timings, so equal
configs give byte-identical tables.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import scipy

from .agp import AGPSolverConfig, fit_nc_coefficients, nc_to_mpo, slice_agps, solve_variational_agp
from .circuit import Circuit, CircuitLayout, apply_circuit, apply_circuit_dense
from .compress import OptimizerConfig, compress_chunks, trotter_adiabatic_circuit, write_run
from .dmrg import DmrgConfig, gap_scan
from .errors import CdCircuitsError, ValidationError
from .metrics import GroundStates, energy_errors, instantaneous_infidelity, target_fidelity
from .mps import MPS, entanglement_entropy, mpo_apply, mpo_apply_dense
from .operators import trotter2_propagator
from .oracle import DENSE_CAP, exact_evolve_cd, ising_dense, nc_ideal_dynamics, trajectory_metrics
from .plots import Series, line_plot
from .problems import (
    AdiabaticProblem,
    classical_chain_minimum,
    combinatorial_instance,
    critical_preparation,
    gap_traversal,
    nc_comparison_hamiltonian,
)
from .schedule import Schedule

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentError",
    "ResultLog",
    "load_config",
    "run_experiment",
    "agp_sweep_rows",
    "nc_reference_rows",
    "interior_minimum",
    "ideal_trotter_trace",
    "nc_bond_profile_rows",
    "gap_rows",
    "trotter_scan_rows",
    "final_metrics",
    "evaluate_run",
    "trotter_scan",
    "render_plots",
    "write_csv",
]

log = logging.getLogger(__name__)

EXPERIMENTS = ("agp-sweep", "nc-bond-profile", "gap-scan", "gap-traversal", "critical-prep", "combinatorial")

# dense statevector pipelines up to this size, MPS/DMRG beyond
DENSE_MAX = 12


class ExperimentError(CdCircuitsError, RuntimeError):
    """A recipe stage failed; the message names the stage."""


@dataclass
class ExperimentConfig:
    """Parameters of one experiment run.

    Only the fields relevant to ``experiment`` are read; :meth:`validate`
    checks that they are present and sane. Lists are grids that the recipe
    iterates over.
    """

    experiment: str
    N: int
    out: str = "results"
    T: float | None = None
    S: float | None = None
    M: int = 1
    L: int = 1
    R: int = 8
    Q: list[int] = field(default_factory=lambda: [100])
    chi: list[int] = field(default_factory=lambda: [8])
    eta: list[float] = field(default_factory=lambda: [1e-6])
    gstar: float | None = None
    seeds: list[int] = field(default_factory=list)
    lam: float = 1.0
    orders: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    points: int = 41
    path: str = "sin2"
    style: str = "brickwork"
    propagator: str = "taylor1"
    rho_mode: str = "propagated-state"
    trotter_T: list[float] = field(default_factory=list)
    agp_sweeps: int = 10
    lbfgs_memory: int = 10
    carry_memory: bool = False
    max_bond: int = 64
    cutoff: float = 1e-12
    seed: int = 7
    threads: int = 1

    def validate(self) -> "ExperimentConfig":
        e = self.experiment
        if e not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {e!r}; choose from {EXPERIMENTS}")
        if self.N < 1:
            raise ValidationError("N must be positive")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        need = {
            "gap-scan": ("T",),
            "gap-traversal": ("T", "S"),
            "critical-prep": ("T", "S"),
            "combinatorial": ("T", "S"),
        }.get(e, ())
        for name in need:
            if getattr(self, name) is None:
                raise ValidationError(f"experiment {e} needs {name}")
        if e == "combinatorial" and not self.seeds:
            raise ValidationError("combinatorial needs explicit seeds")
        if e in ("gap-traversal", "combinatorial") and self.M * self.L != self.R:
            raise ValidationError(f"M*L={self.M * self.L} must equal R={self.R} for gate-count parity")
        if self.lbfgs_memory < 1:
            raise ValidationError("lbfgs_memory must be >= 1")
        if any(c < 1 for c in self.chi) or any(x < 0 for x in self.eta):
            raise ValidationError("chi must be >= 1 and eta >= 0")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        """Digest of every field that affects results (not ``out`` or ``threads``)."""
        d = {k: v for k, v in asdict(self).items() if k not in ("out", "threads")}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Read a TOML config (a flat table) and apply non-``None`` overrides."""
    data: dict = {}
    if path is not None:
        try:
            import tomllib as tomli
        except ModuleNotFoundError:  # Python < 3.11
            import tomli

        with open(path, "rb") as fh:
            data = tomli.load(fh)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    for k in ("experiment", "N"):
        if k not in data:
            raise ValidationError(f"config is missing {k!r}")
    return ExperimentConfig(**data).validate()


# ---------------------------------------------------------------------------
# persistence


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def write_csv(path: str | Path, columns: list[str], rows: Iterable[dict]) -> Path:
    """CSV with a fixed header; floats use 12 significant digits."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])
    return p


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class ResultLog:
    """Append-only long table ``metric,slice,t,lambda,value,config_hash``.

    Each ``(metric, slice)`` pair may be recorded once.
    """

    COLUMNS = ["metric", "slice", "t", "lambda", "value", "config_hash"]

    def __init__(self, config_hash: str):
        self.config_hash = config_hash
        self.rows: list[dict] = []
        self._keys: set[tuple[str, int]] = set()

    def append(self, metric: str, slice_: int, t: float, lam: float, value: float) -> None:
        key = (metric, int(slice_))
        if key in self._keys:
            raise ValueError(f"duplicate record {key}")
        self._keys.add(key)
        self.rows.append({"metric": metric, "slice": int(slice_), "t": t, "lambda": lam, "value": value, "config_hash": self.config_hash})

    def extend_traces(self, label: str, traces: dict, names: Iterable[str]) -> None:
        for name in names:
            for s, (t, lam, v) in enumerate(zip(traces["t"], traces["lambda"], traces[name])):
                self.append(f"{name}[{label}]", s, t, lam, v)

    def write(self, path: str | Path) -> Path:
        return write_csv(path, self.COLUMNS, self.rows)


def _versions() -> dict:
    from . import __version__

    return {"cdcircuits": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def _pmap(fn: Callable, items: list, threads: int) -> list:
    """Ordered map over a bounded worker pool; results are collected by the caller."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# building blocks shared by recipes and tests


def agp_sweep_rows(
    problem: AdiabaticProblem,
    lam: float,
    chis: list[int],
    etas: list[float],
    base: AGPSolverConfig | None = None,
    warm_chi: bool = True,
    threads: int = 1,
) -> list[dict]:
    """Variational AGP cost/error on a ``chi x eta`` grid.

    With ``warm_chi`` each ``chi`` (ascending) starts from the previous
    ``chi``'s solution at the same ``eta``, zero-padded to the larger bond.
    """
    base = base or AGPSolverConfig()
    h, dh = problem.hamiltonian(lam), problem.dh()

    def one_eta(eta: float) -> list[dict]:
        rows, prev = [], None
        for chi in sorted(chis):
            cfg = replace(base, chi=chi, eta=eta, init="previous-solution" if (warm_chi and prev is not None) else base.init)
            sol = solve_variational_agp(h, dh, cfg, initial=prev)
            prev = sol.a_tilde
            rows.append(
                {
                    "chi": chi,
                    "eta": eta,
                    "cost": sol.normalized_cost,
                    "error": sol.normalized_error,
                    "hermitian_defect": sol.hermitian_defect,
                    "sweeps": sol.sweeps_done,
                    "converged": sol.converged,
                }
            )
        return rows

    per_eta = _pmap(one_eta, list(etas), threads)
    out = [r for rows in per_eta for r in rows]
    out.sort(key=lambda r: (r["chi"], r["eta"]))
    return out


def nc_reference_rows(problem: AdiabaticProblem, lam: float, orders: list[int]) -> list[dict]:
    """Fitted nested-commutator cost and error for each order."""
    h, dh = problem.pauli(lam), problem.dh_pauli()
    rows = []
    for l in orders:
        a = fit_nc_coefficients(h, dh, l)
        rows.append({"order": l, "cost": a.normalized_cost, "error": a.normalized_error})
    return rows


def interior_minimum(values: list[float]) -> bool:
    """True if the minimum is strictly below both end points of the grid."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return False
    k = int(np.argmin(v))
    return 0 < k < v.size - 1 and v[k] < v[0] and v[k] < v[-1]


def nc_bond_profile_rows(problem: AdiabaticProblem, lam: float, orders: list[int]) -> list[dict]:
    """Max MPO bond of the NC ansatz by both construction routes."""
    h, dh = problem.pauli(lam), problem.dh_pauli()
    rows = []
    for l in orders:
        ans = fit_nc_coefficients(h, dh, l)
        a1, b1 = nc_to_mpo(ans, "pauli-strings")
        a2, b2 = nc_to_mpo(ans, "mpo-arithmetic")
        diff = (a1 - a2).frobenius_norm()
        scale = max(a1.frobenius_norm(), 1e-300)
        rows.append({"order": l, "bond_pauli": b1, "bond_mpo": b2, "rel_diff": diff / scale})
    return rows


def _lam_to_t(sched: Schedule, lam: float) -> float:
    lam = min(max(lam, 0.0), 1.0)
    if sched.path == "linear":
        return lam * sched.T
    if sched.path == "sin2":
        return 2 * sched.T / np.pi * np.arcsin(np.sqrt(lam))
    inner = 2 / np.pi * np.arcsin(np.sqrt(lam))
    return 2 * sched.T / np.pi * np.arcsin(np.sqrt(inner))


def _half_chain_entropy(vec: np.ndarray, n: int) -> float:
    s = MPS.from_dense(vec, n, cutoff=0.0)
    return max(entanglement_entropy(s, b) for b in range(n - 1)) if n > 1 else 0.0


def gap_rows(
    problem: AdiabaticProblem,
    points: int,
    sched: Schedule | None = None,
    agp_cfg: AGPSolverConfig | None = None,
    dmrg: DmrgConfig | None = None,
) -> tuple[list[dict], list[dict], list[dict]]:
    """Spectral gaps along the path without and with the CD term.

    With ``sched`` given, the CD Hamiltonian at ``lam`` is
    ``H(lam) + lam_dot (A + A^dag)/2`` where ``A`` is the variational AGP and
    ``lam_dot`` is taken at the time the schedule reaches ``lam``.

    Returns:
        ``(plain, cd, entropy)`` row lists; ``cd`` is empty without ``sched``.
        Entropy rows hold the maximum bond entropy of both ground states.
    """
    n = problem.nsites
    lams = np.linspace(0.0, 1.0, points)
    dense = n <= DENSE_MAX
    dh = problem.dh()
    cd_ops = {}
    if sched is not None:
        cfg = agp_cfg or AGPSolverConfig(chi=4)
        prev = None
        for lam in lams:
            ldot = sched.lam_dot(_lam_to_t(sched, float(lam)))
            c = replace(cfg, init="previous-solution") if prev is not None else cfg
            sol = solve_variational_agp(problem.hamiltonian(float(lam)), dh, c, initial=prev)
            prev = sol.a_tilde
            cd_ops[float(lam)] = (ldot, sol.a_tilde)

    def cd_mpo(lam):
        ldot, a = cd_ops[lam]
        return (problem.hamiltonian(lam) + a.hermitian_part().scale(ldot)).compress()

    plain, cd, ent = [], [], []
    if dense:
        for lam in lams:
            lam = float(lam)
            hs = ising_dense(problem.params(lam))
            e, u = np.linalg.eigh(hs)
            plain.append({"lambda": lam, "gap": e[1] - e[0], "e0": e[0], "e1": e[1], "converged": True})
            row = {"lambda": lam, "entropy": _half_chain_entropy(u[:, 0], n)}
            if sched is not None:
                hc = cd_mpo(lam).to_dense()
                hc = 0.5 * (hc + hc.conj().T)
                ec, uc = np.linalg.eigh(hc)
                cd.append({"lambda": lam, "gap": ec[1] - ec[0], "e0": ec[0], "e1": ec[1], "converged": True})
                row["entropy_cd"] = _half_chain_entropy(uc[:, 0], n)
            ent.append(row)
        return plain, cd, ent
    dmrg = dmrg or DmrgConfig()
    plain = gap_scan(problem.hamiltonian, points, dmrg)
    if sched is not None:
        cd = gap_scan(lambda lam: cd_mpo(float(lam)), points, dmrg)
    return plain, cd, ent


def final_metrics(state, problem: AdiabaticProblem, reference: GroundStates, lam: float = 1.0) -> dict:
    """Target fidelity, energy errors and instantaneous infidelity of ``state`` at ``lam``."""
    ef, psif = reference(1.0)
    es, psis = reference(lam)
    if isinstance(psif, np.ndarray) and isinstance(state, MPS):
        state = state.to_dense()
    if isinstance(psif, MPS) and not isinstance(state, MPS):
        state = MPS.from_dense(state, problem.nsites)
    e_targ, e_inst = energy_errors(state, reference.hamiltonian(1.0), psif, reference.hamiltonian(lam), psis)
    return {
        "fid_target": target_fidelity(state, psif),
        "e_targ": e_targ,
        "e_inst": e_inst,
        "inst_infidelity": instantaneous_infidelity(state, psis),
    }


def _apply(c: Circuit, psi, max_bond: int = 64, cutoff: float = 1e-12):
    if isinstance(psi, MPS):
        return apply_circuit(c, psi, max_bond=max_bond, cutoff=cutoff)
    return apply_circuit_dense(c, psi)


def trotter_scan_rows(
    problem: AdiabaticProblem,
    R: int,
    Ts: list[float],
    path: str,
    psi0,
    reference: GroundStates,
    threads: int = 1,
    max_bond: int = 64,
) -> list[dict]:
    """Final metrics of ``R``-step second-order Trotter circuits over total times ``Ts``."""

    def one(T: float) -> dict:
        c = trotter_adiabatic_circuit(float(T), R, problem.params, path)
        row = {"T": float(T), "two_qubit_gates": c.two_qubit_count()}
        row.update(final_metrics(_apply(c, psi0, max_bond), problem, reference))
        return row

    return _pmap(one, list(Ts), threads)


def _best_trotter(rows: list[dict]) -> tuple[dict, dict]:
    """Rows with the highest fidelity and with the lowest ``|e_targ|``."""
    return max(rows, key=lambda r: r["fid_target"]), min(rows, key=lambda r: abs(r["e_targ"]))


# ---------------------------------------------------------------------------
# recipes


def _agp_sweep(cfg: ExperimentConfig, out: Path, rlog: ResultLog) -> dict:
    problem = nc_comparison_hamiltonian(cfg.N)
    base = AGPSolverConfig(sweeps=cfg.agp_sweeps, seed=cfg.seed)
    rows = agp_sweep_rows(problem, cfg.lam, cfg.chi, cfg.eta, base, threads=cfg.threads)
    write_csv(out / "sweep.csv", ["chi", "eta", "cost", "error", "hermitian_defect", "sweeps", "converged"], rows)
    nc = nc_reference_rows(problem, cfg.lam, cfg.orders)
    write_csv(out / "nc_reference.csv", ["order", "cost", "error"], nc)
    best = {}
    for chi in cfg.chi:
        sub = [r for r in rows if r["chi"] == chi]
        k = int(np.argmin([r["error"] for r in sub]))
        best[str(chi)] = {"eta": sub[k]["eta"], "error": sub[k]["error"], "interior_minimum": interior_minimum([r["error"] for r in sub])}
    return {"best_eta": best, "nc_error": {str(r["order"]): r["error"] for r in nc}}


def _nc_profile(cfg: ExperimentConfig, out: Path, rlog: ResultLog) -> dict:
    rows = nc_bond_profile_rows(nc_comparison_hamiltonian(cfg.N), cfg.lam, cfg.orders)
    write_csv(out / "nc_bonds.csv", ["order", "bond_pauli", "bond_mpo", "rel_diff"], rows)
    return {"max_rel_diff": max(r["rel_diff"] for r in rows)}


_GAP_COLUMNS = ["lambda", "gap", "e0", "e1", "converged"]


def _gap_scan(cfg: ExperimentConfig, out: Path, rlog: ResultLog) -> dict:
    problem = gap_traversal(cfg.N, cfg.gstar)
    sched = Schedule(cfg.T, cfg.S or 1.0, cfg.path)
    agp = AGPSolverConfig(chi=cfg.chi[0], eta=cfg.eta[0], sweeps=cfg.agp_sweeps, seed=cfg.seed)
    plain, cd, ent = gap_rows(problem, cfg.points, sched, agp, DmrgConfig(max_bond=cfg.max_bond))
    write_csv(out / "gap.csv", _GAP_COLUMNS, plain)
    write_csv(out / "gap_cd.csv", _GAP_COLUMNS, cd)
    if ent:
        write_csv(out / "entropy.csv", ["lambda", "entropy", "entropy_cd"], ent)
    k = int(np.argmin([r["gap"] for r in plain]))
    return {
        "min_gap": plain[k]["gap"],
        "min_gap_lambda": plain[k]["lambda"],
        "cd_gap_at_min": cd[k]["gap"] if cd else None,
    }


def _optimizer(cfg: ExperimentConfig, q: int) -> OptimizerConfig:
    return OptimizerConfig(Q=q, memory=cfg.lbfgs_memory, carry_memory=cfg.carry_memory)


def _run_cd_compression(problem, sched, cfg: ExperimentConfig, chi: int, q: int, reference, psi0):
    agp_cfg = AGPSolverConfig(chi=chi, eta=cfg.eta[0], sweeps=cfg.agp_sweeps, seed=cfg.seed)
    sols = slice_agps(problem, sched, agp_cfg)
    layout = CircuitLayout(cfg.style, cfg.N, cfg.L, cfg.M)
    run = compress_chunks(
        sched,
        problem,
        [s.a_tilde for s in sols],
        layout,
        _optimizer(cfg, q),
        rho_mode=cfg.rho_mode,
        psi0=psi0,
        propagator=cfg.propagator,
        max_bond=cfg.max_bond,
        cutoff=cfg.cutoff,
        reference=reference,
    )
    return run, sols


def _slice_traces(run, initial: dict) -> dict:
    tr = {k: [initial[k]] for k in ("t", "lambda", "fid_target", "e_targ", "e_inst", "inst_infidelity")}
    for r in run.slices:
        for k in tr:
            tr[k].append(r[k])
    return tr


def _initial_row(psi0, problem, reference) -> dict:
    row = {"t": 0.0, "lambda": 0.0}
    row.update(final_metrics(psi0, problem, reference, lam=0.0))
    return row


_TRACE_COLUMNS = ["slice", "t", "lambda", "fid_target", "e_targ", "e_inst", "inst_infidelity"]


def _trace_rows(tr: dict) -> list[dict]:
    return [{"slice": s, **{k: tr[k][s] for k in tr}} for s in range(len(tr["t"]))]


def _initial_state(problem, reference):
    psi = problem.initial_product_state()
    if psi is None:
        psi = reference(0.0)[1]
    if problem.nsites <= DENSE_MAX and isinstance(psi, MPS):
        psi = psi.to_dense()
    return psi


def _gap_traversal(cfg: ExperimentConfig, out: Path, rlog: ResultLog) -> dict:
    problem = gap_traversal(cfg.N, cfg.gstar)
    sched = Schedule(cfg.T, cfg.S, cfg.path, cfg.M)
    reference = GroundStates(problem, dense_max=DENSE_MAX, dmrg=DmrgConfig(max_bond=cfg.max_bond))
    psi0 = _initial_state(problem, reference)
    init = _initial_row(psi0, problem, reference)
    summary: dict = {"cd": {}, "nc": {}}
    for chi in cfg.chi:
        run, sols = _run_cd_compression(problem, sched, cfg, chi, cfg.Q[-1], reference, psi0)
        write_run(run, out, f"cd_chi{chi}")
        tr = _slice_traces(run, init)
        write_csv(out / f"cd_chi{chi}_trace.csv", _TRACE_COLUMNS, _trace_rows(tr))
        rlog.extend_traces(f"cd chi={chi}", tr, ("fid_target", "e_targ", "e_inst"))
        write_csv(
            out / f"agp_chi{chi}.csv",
            ["slice", "cost", "error", "hermitian_defect"],
            [{"slice": s + 1, "cost": x.normalized_cost, "error": x.normalized_error, "hermitian_defect": x.hermitian_defect} for s, x in enumerate(sols)],
        )
        summary["cd"][str(chi)] = {
            "fid_target": tr["fid_target"][-1],
            "e_targ": tr["e_targ"][-1],
            "two_qubit_gates": sum(c.two_qubit_count() for c in run.circuits),
            "warnings": run.warnings,
        }
    ts = cfg.trotter_T or [0.5 * k for k in range(1, 21)]
    trot = trotter_scan_rows(problem, cfg.R, ts, cfg.path, psi0, reference, cfg.threads, cfg.max_bond)
    write_csv(out / "trotter_scan.csv", ["T", "fid_target", "e_targ", "e_inst", "inst_infidelity", "two_qubit_gates"], trot)
    bf, be = _best_trotter(trot)
    summary["trotter"] = {"best_fid": bf["fid_target"], "best_fid_T": bf["T"], "best_abs_e_targ": abs(be["e_targ"]), "best_e_T": be["T"]}
    if cfg.N <= DENSE_CAP:
        nc_rows = []
        for l in [0] + list(cfg.orders):
            tr = nc_ideal_dynamics(l, problem, Schedule(cfg.T, cfg.S, cfg.path), psi0=_dense(psi0))
            rlog.extend_traces(f"nc l={l}", tr, ("fid_target", "e_targ"))
            nc_rows.append({"order": l, "fid_target": tr["fid_target"][-1], "e_targ": tr["e_targ"][-1]})
        write_csv(out / "nc_final.csv", ["order", "fid_target", "e_targ"], nc_rows)
        summary["nc"] = {str(r["order"]): r["fid_target"] for r in nc_rows}
        hb = lambda lam: ising_dense(problem.params(lam))  # noqa: E731
        traj = exact_evolve_cd(hb, Schedule(cfg.T, cfg.S, cfg.path), _dense(psi0), "exact", ising_dense(problem.dparams()))
        ex = trajectory_metrics(traj, problem, Schedule(cfg.T, cfg.S, cfg.path))
        write_csv(out / "exact_cd_trace.csv", _TRACE_COLUMNS, _trace_rows(ex))
        summary["exact_cd_fid"] = float(ex["fid_target"][-1])
    return summary


def _dense(psi) -> np.ndarray:
    return psi.to_dense() if isinstance(psi, MPS) else np.asarray(psi)


def ideal_trotter_trace(problem: AdiabaticProblem, sched: Schedule, psi0, reference: GroundStates, max_bond: int = 256) -> dict:
    """Numerically exact application of the second-order Trotter steps used as compression targets."""
    psi = psi0.copy()
    tr = {"t": [0.0], "lambda": [0.0], "inst_infidelity": [instantaneous_infidelity(_match(psi, reference), reference(0.0)[1])]}
    for (_, lam, _), (t, lam_end) in zip(sched.slice_midpoints(), sched.slice_ends()):
        w = trotter2_propagator(problem.params(lam), sched.tau)
        if isinstance(psi, MPS):
            psi = mpo_apply(w, psi, max_bond=max_bond, cutoff=1e-14)
            psi.normalize()
        else:
            psi = mpo_apply_dense(w, psi)
        tr["t"].append(t)
        tr["lambda"].append(lam_end)
        tr["inst_infidelity"].append(instantaneous_infidelity(_match(psi, reference), reference(lam_end)[1]))
    return tr


def _match(state, reference: GroundStates):
    ref = reference(0.0)[1]
    if isinstance(ref, np.ndarray) and isinstance(state, MPS):
        return state.to_dense()
    if isinstance(ref, MPS) and not isinstance(state, MPS):
        return MPS.from_dense(state, ref.nsites)
    return state


def _critical_prep(cfg: ExperimentConfig, out: Path, rlog: ResultLog) -> dict:
    problem = critical_preparation(cfg.N)
    sched = Schedule(cfg.T, cfg.S, cfg.path, cfg.M)
    reference = GroundStates(problem, dense_max=DENSE_MAX, dmrg=DmrgConfig(max_bond=cfg.max_bond))
    psi0 = _initial_state(problem, reference)
    layout = CircuitLayout(cfg.style, cfg.N, cfg.L, cfg.M)
    summary: dict = {"final_inst_infidelity": {}}

    def one(q: int):
        return compress_chunks(
            sched, problem, None, layout, _optimizer(cfg, q), rho_mode=cfg.rho_mode, psi0=psi0,
            propagator=cfg.propagator, max_bond=cfg.max_bond, cutoff=cfg.cutoff, reference=reference,
        )

    runs = _pmap(one, list(cfg.Q), cfg.threads)
    init = _initial_row(psi0, problem, reference)
    for q, run in zip(cfg.Q, runs):
        write_run(run, out, f"q{q}")
        tr = _slice_traces(run, init)
        write_csv(out / f"q{q}_trace.csv", _TRACE_COLUMNS, _trace_rows(tr))
        rlog.extend_traces(f"Q={q}", tr, ("inst_infidelity",))
        summary["final_inst_infidelity"][str(q)] = tr["inst_infidelity"][-1]
    ideal = ideal_trotter_trace(problem, sched, psi0, reference, cfg.max_bond)
    write_csv(out / "ideal_trotter.csv", ["slice", "t", "lambda", "inst_infidelity"], _trace_rows(ideal))
    rlog.extend_traces("ideal", ideal, ("inst_infidelity",))
    summary["ideal_final_inst_infidelity"] = ideal["inst_infidelity"][-1]
    return summary


def _combinatorial(cfg: ExperimentConfig, out: Path, rlog: ResultLog) -> dict:
    ts = cfg.trotter_T or [float(k) for k in range(1, 21)]

    def one(seed: int) -> tuple[dict, list[dict]]:
        problem = combinatorial_instance(cfg.N, seed)
        e_dp, bits = classical_chain_minimum(problem.final)
        reference = GroundStates(problem, dense_max=DENSE_MAX, dmrg=DmrgConfig(max_bond=cfg.max_bond))
        psi0 = _initial_state(problem, reference)
        sched = Schedule(cfg.T, cfg.S, cfg.path, cfg.M)
        run, _ = _run_cd_compression(problem, sched, cfg, cfg.chi[0], cfg.Q[-1], reference, psi0)
        cd = final_metrics(run.final_state, problem, reference)
        trot = trotter_scan_rows(problem, cfg.R, ts, cfg.path, psi0, reference, 1, cfg.max_bond)
        _, be = _best_trotter(trot)
        e_ref = reference(1.0)[0]
        row = {
            "seed": seed,
            "e_exact": e_dp,
            "e_reference": e_ref,
            "e_cd": e_ref * (1 + cd["e_targ"]),
            "e_targ_cd": cd["e_targ"],
            "fid_cd": cd["fid_target"],
            "e_targ_trotter_best": be["e_targ"],
            "T_trotter_best": be["T"],
            "dp_matches_reference": abs(e_dp - e_ref) <= 1e-9 * max(1.0, abs(e_dp)),
            "bits": "".join(map(str, bits)),
        }
        for r in trot:
            r["seed"] = seed
        return row, trot

    results = _pmap(one, list(cfg.seeds), cfg.threads)
    rows = [r for r, _ in results]
    write_csv(
        out / "instances.csv",
        ["seed", "e_exact", "e_reference", "e_cd", "e_targ_cd", "fid_cd", "e_targ_trotter_best", "T_trotter_best", "dp_matches_reference", "bits"],
        rows,
    )
    write_csv(out / "trotter_scan.csv", ["seed", "T", "e_targ", "fid_target"], [r for _, tr in results for r in tr])
    return {
        str(r["seed"]): {"e_targ_cd": r["e_targ_cd"], "e_targ_trotter_best": r["e_targ_trotter_best"], "dp_ok": r["dp_matches_reference"]}
        for r in rows
    }


_RECIPES: dict[str, Callable[[ExperimentConfig, Path, ResultLog], dict]] = {
    "agp-sweep": _agp_sweep,
    "nc-bond-profile": _nc_profile,
    "gap-scan": _gap_scan,
    "gap-traversal": _gap_traversal,
    "critical-prep": _critical_prep,
    "combinatorial": _combinatorial,
}


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None, plots: bool = True) -> Path:
    """Run one recipe and write its tables, manifest and plots.

    Raises:
        ExperimentError: Naming the failing stage, chained to the cause.
    """
    cfg.validate()
    out_dir = Path(out if out is not None else cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    (out_dir / "config.json").write_text(json.dumps({"config_hash": h, "config": cfg.to_dict()}, indent=1, sort_keys=True) + "\n")
    rlog = ResultLog(h)
    t0 = time.time()
    try:
        summary = _RECIPES[cfg.experiment](cfg, out_dir, rlog)
    except CdCircuitsError as exc:
        raise ExperimentError(f"{cfg.experiment}: {type(exc).__name__}: {exc}") from exc
    if rlog.rows:
        rlog.write(out_dir / "records.csv")
    wall = time.time() - t0
    written = []
    if plots:
        try:
            written = [p.name for p in render_plots(out_dir, cfg.experiment)]
        except (OSError, KeyError, ValueError) as exc:
            raise ExperimentError(f"plotting: {exc}") from exc
    manifest = {
        "experiment": cfg.experiment,
        "config_hash": h,
        "config": cfg.to_dict(),
        "versions": _versions(),
        "wall_time_s": wall,
        "tables": sorted(p.name for p in out_dir.glob("*.csv")),
        "plots": written,
        "summary": summary,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, default=_json_default) + "\n")
    return out_dir


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def trotter_scan(cfg: ExperimentConfig, out: str | Path, seed: int | None = None) -> Path:
    """Trotter baseline alone for a gap-traversal or combinatorial config.

    Writes ``trotter_scan.csv`` with columns
    ``T,fid_target,e_targ,e_inst,inst_infidelity,two_qubit_gates``.
    """
    cfg.validate()
    if cfg.experiment not in ("gap-traversal", "combinatorial"):
        raise ValidationError(f"trotter-scan needs a gap-traversal or combinatorial config, got {cfg.experiment}")
    problem = _problem_for(cfg, seed)
    reference = GroundStates(problem, dense_max=DENSE_MAX, dmrg=DmrgConfig(max_bond=cfg.max_bond))
    psi0 = _initial_state(problem, reference)
    default = [0.5 * k for k in range(1, 21)] if cfg.experiment == "gap-traversal" else [float(k) for k in range(1, 21)]
    rows = trotter_scan_rows(problem, cfg.R, cfg.trotter_T or default, cfg.path, psi0, reference, cfg.threads, cfg.max_bond)
    return write_csv(Path(out) / "trotter_scan.csv", ["T", "fid_target", "e_targ", "e_inst", "inst_infidelity", "two_qubit_gates"], rows)


# ---------------------------------------------------------------------------
# evaluation of stored circuits


def _problem_for(cfg: ExperimentConfig, seed: int | None = None) -> AdiabaticProblem:
    if cfg.experiment in ("gap-scan", "gap-traversal"):
        return gap_traversal(cfg.N, cfg.gstar)
    if cfg.experiment == "critical-prep":
        return critical_preparation(cfg.N)
    if cfg.experiment == "combinatorial":
        return combinatorial_instance(cfg.N, seed if seed is not None else cfg.seeds[0])
    return nc_comparison_hamiltonian(cfg.N)


def evaluate_run(cfg: ExperimentConfig, run_json: str | Path, seed: int | None = None) -> list[dict]:
    """Metrics after each stored chunk circuit of a saved run.

    Rows: ``chunk,t,lambda,fid_target,e_targ,e_inst,inst_infidelity,two_qubit_gates``.
    """
    rec = json.loads(Path(run_json).read_text())
    circuits = [Circuit.from_json(c) for c in rec["circuits"]]
    problem = _problem_for(cfg, seed)
    sched = Schedule(cfg.T, cfg.S, cfg.path, cfg.M)
    if len(circuits) != sched.M:
        raise ValidationError(f"run has {len(circuits)} chunks, config expects {sched.M}")
    reference = GroundStates(problem, dense_max=DENSE_MAX, dmrg=DmrgConfig(max_bond=cfg.max_bond))
    psi = _initial_state(problem, reference)
    ends = sched.slice_ends()
    rows = []
    for m, (c, chunk) in enumerate(zip(circuits, sched.chunks())):
        psi = _apply(c, psi, cfg.max_bond, cfg.cutoff)
        t, lam = ends[chunk[-1]]
        row = {"chunk": m, "t": t, "lambda": lam, "two_qubit_gates": c.two_qubit_count()}
        row.update(final_metrics(psi, problem, reference, lam))
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# plots


def _col(rows, k):
    return [float(r[k]) for r in rows]


def _plots_agp(d: Path) -> list[Path]:
    rows = read_csv(d / "sweep.csv")
    chis = sorted({int(r["chi"]) for r in rows})
    out = []
    for metric in ("cost", "error"):
        ser = []
        for chi in chis:
            sub = [r for r in rows if int(r["chi"]) == chi]
            ser.append(Series(f"chi={chi}", _col(sub, "eta"), _col(sub, metric), markers=True))
        nc_path = d / "nc_reference.csv"
        if nc_path.exists():
            nc = read_csv(nc_path)
            if nc:
                ref = nc[-1]
                etas = _col(rows, "eta")
                ser.append(Series(f"NC l={ref['order']}", [min(etas), max(etas)], [float(ref[metric])] * 2, dashed=True))
        out.append(line_plot(ser, d / f"agp_{metric}.svg", f"normalized {metric} vs regularization", "eta", metric, logx=True, logy=True))
    return out


def _plots_nc(d: Path) -> list[Path]:
    rows = read_csv(d / "nc_bonds.csv")
    ser = [Series("Pauli strings", _col(rows, "order"), _col(rows, "bond_pauli"), markers=True),
           Series("MPO arithmetic", _col(rows, "order"), _col(rows, "bond_mpo"), dashed=True, markers=True)]
    return [line_plot(ser, d / "nc_bonds.svg", "max bond of NC operator", "order l", "max bond")]


def _plots_gap(d: Path) -> list[Path]:
    plain = read_csv(d / "gap.csv")
    ser = [Series("H", _col(plain, "lambda"), _col(plain, "gap"))]
    cd = read_csv(d / "gap_cd.csv") if (d / "gap_cd.csv").exists() else []
    if cd:
        ser.append(Series("H + CD", _col(cd, "lambda"), _col(cd, "gap"), dashed=True))
    out = [line_plot(ser, d / "gap.svg", "spectral gap", "lambda", "gap")]
    if (d / "entropy.csv").exists():
        ent = read_csv(d / "entropy.csv")
        es = [Series("H", _col(ent, "lambda"), _col(ent, "entropy"))]
        if ent and ent[0].get("entropy_cd"):
            es.append(Series("H + CD", _col(ent, "lambda"), _col(ent, "entropy_cd"), dashed=True))
        out.append(line_plot(es, d / "entropy.svg", "max bond entropy of ground state", "lambda", "S_VN"))
    return out


def _plots_traversal(d: Path) -> list[Path]:
    out = []
    traces = sorted(d.glob("cd_chi*_trace.csv"))
    for metric, ylab, logy in (("fid_target", "target fidelity", False), ("e_targ", "|target energy error|", True)):
        ser = []
        for p in traces:
            rows = read_csv(p)
            ys = _col(rows, metric)
            ser.append(Series(p.stem.replace("_trace", ""), _col(rows, "t"), [abs(y) for y in ys] if logy else ys))
        if (d / "exact_cd_trace.csv").exists():
            rows = read_csv(d / "exact_cd_trace.csv")
            ys = _col(rows, metric)
            ser.append(Series("exact CD", _col(rows, "t"), [abs(y) for y in ys] if logy else ys, dashed=True))
        out.append(line_plot(ser, d / f"traversal_{metric}.svg", ylab, "t", ylab, logy=logy))
    if (d / "trotter_scan.csv").exists():
        tr = read_csv(d / "trotter_scan.csv")
        ser = [Series("Trotter R steps", _col(tr, "T"), _col(tr, "fid_target"), markers=True)]
        out.append(line_plot(ser, d / "trotter_scan.svg", "Trotter final target fidelity", "T", "fidelity"))
    return out


def _plots_critical(d: Path) -> list[Path]:
    ser = []
    for p in sorted(d.glob("q*_trace.csv"), key=lambda p: int(p.stem[1:].split("_")[0])):
        rows = read_csv(p)
        ser.append(Series(f"Q={p.stem[1:].split('_')[0]}", _col(rows, "t"), _col(rows, "inst_infidelity")))
    if (d / "ideal_trotter.csv").exists():
        rows = read_csv(d / "ideal_trotter.csv")
        ser.append(Series("ideal Trotter", _col(rows, "t"), _col(rows, "inst_infidelity"), dashed=True))
    return [line_plot(ser, d / "inst_infidelity.svg", "instantaneous infidelity", "t", "1 - F", logy=True)]


def _plots_combinatorial(d: Path) -> list[Path]:
    tr = read_csv(d / "trotter_scan.csv")
    inst = {int(r["seed"]): r for r in read_csv(d / "instances.csv")}
    ser = []
    for seed in sorted(inst):
        sub = [r for r in tr if int(r["seed"]) == seed]
        ser.append(Series(f"id {seed} Trotter", _col(sub, "T"), [abs(v) for v in _col(sub, "e_targ")]))
        ts = _col(sub, "T")
        ser.append(Series(f"id {seed} CD", [min(ts), max(ts)], [abs(float(inst[seed]["e_targ_cd"]))] * 2, dashed=True))
    return [line_plot(ser, d / "combinatorial.svg", "final energy error", "T (Trotter)", "|e_targ|", logy=True)]


_PLOTTERS = {
    "agp-sweep": _plots_agp,
    "nc-bond-profile": _plots_nc,
    "gap-scan": _plots_gap,
    "gap-traversal": _plots_traversal,
    "critical-prep": _plots_critical,
    "combinatorial": _plots_combinatorial,
}


def render_plots(out_dir: str | Path, experiment: str | None = None) -> list[Path]:
    """(Re)draw the SVG plots of a result directory from its CSV tables."""
    d = Path(out_dir)
    if experiment is None:
        experiment = json.loads((d / "config.json").read_text())["config"]["experiment"]
    return _PLOTTERS[experiment](d)
