"""Parameterized nearest-neighbour circuits, their action on states, and analytic gradients.

Gate conventions: ``Rx(t) = exp(-i t X / 2)``, ``Rz(t) = exp(-i t Z / 2)``,
``Uzz(t) = exp(-i t Z Z / 2)``; ``CNOT`` is fixed with ``sites = (control, target)``.
Rotations may also carry a fixed angle (``slot is None``).

A circuit is stored as an ordered list of *blocks*. Each block is a short run of
gates supported on one site or on two adjacent sites; it is contracted into a
single ``2x2`` or ``4x4`` unitary before touching the state, so a two-site block
costs one SVD regardless of how many gates it contains.

Two state backends share one adjoint-gradient routine:

* ``"dense"``: a statevector (or a vectorized ``2^N x 2^N`` operator in trace mode),
* ``"mps"``: an MPS with local SVD splits and cached transition environments.

Trace mode acts on vectorized operators (``out * 2 + in`` per site); gates hit
the ``out`` leg only, so ``|U>> = (U (x) 1)|1>>``.
"""

from __future__ import annotations

import json
from functools import lru_cache
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .mps import DEFAULT_CUTOFF, MPO, MPS
from .tensor import svd_truncate

__all__ = [
    "Gate",
    "Block",
    "CircuitLayout",
    "Circuit",
    "build_brickwork",
    "build_sequential",
    "build_chunk",
    "apply_circuit",
    "apply_circuit_dense",
    "circuit_unitary",
    "cost_and_gradient",
    "zxz_angles",
    "gate_matrix",
]

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)
_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)
_ZZ = np.diag([1.0, -1.0, -1.0, 1.0]).astype(complex)

KINDS = ("Rx", "Rz", "Uzz", "CNOT")


@dataclass(frozen=True)
class Gate:
    """One gate; ``slot`` indexes ``theta`` or is ``None`` for a fixed gate."""

    kind: str
    sites: tuple[int, ...]
    slot: int | None = None
    angle: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        nq = 1 if self.kind in ("Rx", "Rz") else 2
        if len(self.sites) != nq:
            raise ValidationError(f"{self.kind} acts on {nq} site(s), got {self.sites}")
        if nq == 2 and abs(self.sites[0] - self.sites[1]) != 1:
            raise ValidationError(f"{self.kind} must act on adjacent sites, got {self.sites}")
        if self.kind == "CNOT" and self.slot is not None:
            raise ValidationError("CNOT has no parameter")

    def to_json(self) -> dict:
        return {"kind": self.kind, "sites": list(self.sites), "slot": self.slot, "angle": self.angle}

    @classmethod
    def from_json(cls, d: dict) -> "Gate":
        return cls(d["kind"], tuple(d["sites"]), d.get("slot"), float(d.get("angle", 0.0)))


def _rot(p: np.ndarray, t: float) -> np.ndarray:
    return np.cos(t / 2) * np.eye(p.shape[0]) - 1j * np.sin(t / 2) * p


def gate_matrix(g: Gate, theta: np.ndarray | None = None) -> np.ndarray:
    """Matrix of ``g`` on its own sites (two-site gates in ascending-site order)."""
    t = g.angle if g.slot is None else float(theta[g.slot])
    if g.kind == "Rx":
        return _rot(_X, t)
    if g.kind == "Rz":
        return _rot(_Z, t)
    if g.kind == "Uzz":
        return _rot(_ZZ, t)
    c, tg = g.sites
    if c < tg:
        return np.kron(_P0, _I2) + np.kron(_P1, _X)
    return np.kron(_I2, _P0) + np.kron(_X, _P1)


@dataclass(frozen=True)
class Block:
    """Gates supported on ``sites`` (one site, or two adjacent sites in ascending order)."""

    sites: tuple[int, ...]
    gates: tuple[Gate, ...]

    def __post_init__(self) -> None:
        if len(self.sites) == 2 and self.sites[1] != self.sites[0] + 1:
            raise ValidationError(f"block sites must be adjacent and ascending, got {self.sites}")
        for g in self.gates:
            if not set(g.sites) <= set(self.sites):
                raise ValidationError(f"gate {g} outside block sites {self.sites}")

    def unitary(self, theta: np.ndarray, with_derivatives: bool = False):
        """Block unitary, optionally with ``[(slot, dU/dtheta_slot), ...]``.

        Derivatives insert ``-(i/2) P`` after the differentiated rotation and
        use prefix/suffix products, so all of them cost ``O(len(gates))`` products.
        """
        nb = len(self.sites)
        dim = 2**nb
        eye = np.eye(dim, dtype=complex)
        mats, gens = [], []
        for g in self.gates:
            p = _embedded(g.kind, _position(g, self.sites), nb)
            if g.kind == "CNOT":
                mats.append(p)
                gens.append(None)
            else:
                t = g.angle if g.slot is None else float(theta[g.slot])
                mats.append(np.cos(t / 2) * eye - 1j * np.sin(t / 2) * p)
                gens.append(p if g.slot is not None else None)
        prefix = [eye]
        for m in mats:
            prefix.append(m @ prefix[-1])
        if not with_derivatives:
            return prefix[-1]
        derivs = []
        suffix = eye
        for k in range(len(mats) - 1, -1, -1):
            if gens[k] is not None:
                derivs.append((self.gates[k].slot, suffix @ (-0.5j * gens[k]) @ prefix[k + 1]))
            suffix = suffix @ mats[k]
        return prefix[-1], derivs[::-1]


def _position(g: Gate, sites: tuple[int, ...]) -> int:
    """0/1 for a one-site gate on the first/second block site; 0/1 CNOT control first/second."""
    if len(g.sites) == 1:
        return sites.index(g.sites[0])
    return 0 if g.sites[0] < g.sites[1] else 1


@lru_cache(maxsize=None)
def _embedded(kind: str, pos: int, nb: int) -> np.ndarray:
    """Generator (rotations) or matrix (CNOT) of a gate inside an ``nb``-site block."""
    if kind == "CNOT":
        m = gate_matrix(Gate("CNOT", (0, 1) if pos == 0 else (1, 0)))
    elif kind == "Uzz":
        m = _ZZ
    else:
        m = _X if kind == "Rx" else _Z
        if nb == 2:
            m = np.kron(m, _I2) if pos == 0 else np.kron(_I2, m)
    m = m.copy()
    m.flags.writeable = False
    return m


@dataclass(frozen=True)
class CircuitLayout:
    """Layout descriptor; ``L`` layers per chunk and ``M`` chunks."""

    style: str
    N: int
    L: int
    M: int = 1
    include_initial_1q_layer: bool = True

    def __post_init__(self) -> None:
        if self.style not in ("brickwork", "sequential"):
            raise ValidationError(f"unknown layout style {self.style!r}")
        if self.N < 2 or self.L < 1 or self.M < 1:
            raise ValidationError(f"invalid layout sizes N={self.N}, L={self.L}, M={self.M}")

    def chunk(self) -> "CircuitLayout":
        return replace(self, M=1)

    def to_json(self) -> dict:
        return {
            "style": self.style,
            "N": self.N,
            "L": self.L,
            "M": self.M,
            "include_initial_1q_layer": self.include_initial_1q_layer,
        }


@dataclass
class Circuit:
    layout: CircuitLayout
    blocks: list[Block]
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=float)
        k = self.num_params
        if self.theta.size == 0 and k:
            self.theta = np.zeros(k)
        if self.theta.shape != (k,):
            raise ValidationError(f"theta has shape {self.theta.shape}, expected ({k},)")

    @property
    def nsites(self) -> int:
        return self.layout.N

    @property
    def gates(self) -> list[Gate]:
        return [g for b in self.blocks for g in b.gates]

    @property
    def num_params(self) -> int:
        slots = [g.slot for g in self.gates if g.slot is not None]
        return max(slots) + 1 if slots else 0

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)

    def two_qubit_count(self) -> int:
        return sum(len(g.sites) == 2 for g in self.gates)

    def with_theta(self, theta: np.ndarray) -> "Circuit":
        return Circuit(self.layout, self.blocks, np.array(theta, dtype=float))

    def to_json(self) -> dict:
        gates = []
        for b_idx, b in enumerate(self.blocks):
            for g in b.gates:
                gates.append({**g.to_json(), "block": b_idx})
        return {
            "layout": self.layout.to_json(),
            "blocks": [list(b.sites) for b in self.blocks],
            "gates": gates,
            "theta": [float(x) for x in self.theta],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Circuit":
        layout = CircuitLayout(**d["layout"])
        grouped: list[list[Gate]] = [[] for _ in d["blocks"]]
        for gd in d["gates"]:
            grouped[gd["block"]].append(Gate.from_json(gd))
        blocks = [Block(tuple(s), tuple(gs)) for s, gs in zip(d["blocks"], grouped)]
        return cls(layout, blocks, np.array(d["theta"], dtype=float))

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=1))
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Circuit":
        return cls.from_json(json.loads(Path(path).read_text()))


# builders -------------------------------------------------------------------


class _Slots:
    def __init__(self) -> None:
        self.n = 0

    def next(self) -> int:
        self.n += 1
        return self.n - 1


def _zxz(site: int, slots: _Slots) -> list[Gate]:
    return [Gate("Rz", (site,), slots.next()), Gate("Rx", (site,), slots.next()), Gate("Rz", (site,), slots.next())]


def _ry(site: int, slots: _Slots) -> list[Gate]:
    # Ry(t) = Rz(pi/2) Rx(t) Rz(-pi/2); the two Rz gates are fixed
    return [
        Gate("Rz", (site,), None, -np.pi / 2),
        Gate("Rx", (site,), slots.next()),
        Gate("Rz", (site,), None, np.pi / 2),
    ]


def _brick_pairs(n: int) -> list[tuple[int, int]]:
    even = [(k, k + 1) for k in range(0, n - 1, 2)]
    odd = [(k, k + 1) for k in range(1, n - 1, 2)]
    return even + odd


def _brickwork_chunk(n: int, layers: int, initial: bool, slots: _Slots) -> list[Block]:
    blocks = []
    if initial:
        blocks += [Block((q,), tuple(_zxz(q, slots))) for q in range(n)]
    for _ in range(layers):
        for a, b in _brick_pairs(n):
            gates = [Gate("Uzz", (a, b), slots.next())] + _zxz(a, slots) + _zxz(b, slots)
            blocks.append(Block((a, b), tuple(gates)))
    return blocks


def _sequential_block(a: int, slots: _Slots) -> Block:
    """15 rotations and 3 CNOTs on ``(a, a+1)``.

    Arrangement: ``ZXZ (x) ZXZ``, ``CNOT(a+1 -> a)``, ``Rz(a)`` and ``Ry(a+1)``,
    ``CNOT(a -> a+1)``, ``Ry(a+1)``, ``CNOT(a+1 -> a)``, ``ZXZ (x) ZXZ``.
    This is the standard three-CNOT universal form; its parameter Jacobian has
    full rank 15 at generic angles.
    """
    b = a + 1
    gates = _zxz(a, slots) + _zxz(b, slots)
    gates.append(Gate("CNOT", (b, a)))
    gates += [Gate("Rz", (a,), slots.next())] + _ry(b, slots)
    gates.append(Gate("CNOT", (a, b)))
    gates += _ry(b, slots)
    gates.append(Gate("CNOT", (b, a)))
    gates += _zxz(a, slots) + _zxz(b, slots)
    return Block((a, b), tuple(gates))


def build_chunk(layout: CircuitLayout) -> Circuit:
    """Circuit for a single chunk of ``layout`` (all angles zero)."""
    slots = _Slots()
    lay = layout.chunk()
    if lay.style == "brickwork":
        blocks = _brickwork_chunk(lay.N, lay.L, lay.include_initial_1q_layer, slots)
    else:
        blocks = []
        if lay.include_initial_1q_layer:
            blocks += [Block((q,), tuple(_zxz(q, slots))) for q in range(lay.N)]
        for _ in range(lay.L):
            blocks += [_sequential_block(a, slots) for a in range(lay.N - 1)]
    return Circuit(lay, blocks)


def build_brickwork(N: int, L: int, M: int = 1, include_initial_1q_layer: bool = True) -> Circuit:
    """``M`` brickwork chunks, each a single-qubit ZXZ layer then ``L`` brick layers.

    A brick layer places ``Uzz`` on even bonds then odd bonds (``N - 1`` bricks);
    every brick is followed by a ZXZ rotation on both of its qubits.
    """
    layout = CircuitLayout("brickwork", N, L, M, include_initial_1q_layer)
    slots = _Slots()
    blocks: list[Block] = []
    for _ in range(M):
        blocks += _brickwork_chunk(N, L, include_initial_1q_layer, slots)
    return Circuit(layout, blocks)


def build_sequential(N: int, L: int, M: int = 1, include_initial_1q_layer: bool = False) -> Circuit:
    """``L`` staircase layers of universal two-qubit blocks on bonds ``0..N-2``."""
    layout = CircuitLayout("sequential", N, L, M, include_initial_1q_layer)
    slots = _Slots()
    blocks: list[Block] = []
    for _ in range(M):
        if include_initial_1q_layer:
            blocks += [Block((q,), tuple(_zxz(q, slots))) for q in range(N)]
        for _ in range(L):
            blocks += [_sequential_block(a, slots) for a in range(N - 1)]
    return Circuit(layout, blocks)


def zxz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """Angles ``(c, b, a)`` with ``u = e^{i phi} Rz(a) Rx(b) Rz(c)``, in application order."""
    u = np.asarray(u, dtype=complex)
    u = u / np.sqrt(np.linalg.det(u))
    tol = 1e-12
    s = np.angle(u[1, 1]) - np.angle(u[0, 0]) if abs(u[0, 0]) > tol else 0.0
    d = np.angle(u[1, 0]) - np.angle(u[0, 1]) if abs(u[1, 0]) > tol else 0.0
    a, c = (s + d) / 2, (s - d) / 2
    # a and c are fixed only up to a common shift by pi, which flips the sign of
    # the X angle, so b is read off the de-rotated matrix rather than from |u|
    rz = lambda t: np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])  # noqa: E731
    w = rz(-a) @ u @ rz(-c)
    b = 2 * np.arctan2(-w[1, 0].imag, w[0, 0].real)
    return float(c), float(b), float(a)


# backends -------------------------------------------------------------------


def _lift(u: np.ndarray, nq: int) -> np.ndarray:
    """``u`` acting on the out legs of ``nq`` vectorized sites."""
    if nq == 1:
        return np.kron(u, _I2)
    u4 = u.reshape(2, 2, 2, 2)
    full = np.einsum("abcd,xy,zw->axbzcydw", u4, _I2, _I2)
    return full.reshape(16, 16)


class _DenseState:
    def __init__(self, vec: np.ndarray, n: int, d: int):
        self.v = np.asarray(vec, dtype=complex).reshape(-1).copy()
        self.n, self.d = n, d

    def copy(self) -> "_DenseState":
        return _DenseState(self.v, self.n, self.d)

    def _view(self, sites):
        j, k = sites[0], len(sites)
        return self.v.reshape(self.d**j, self.d**k, self.d ** (self.n - j - k))

    def apply(self, u: np.ndarray, sites) -> None:
        self.v = np.matmul(u, self._view(sites)).reshape(-1)

    def overlap(self, other: "_DenseState") -> complex:
        return complex(np.vdot(self.v, other.v))

    def transition(self, other: "_DenseState", sites) -> np.ndarray:
        """``M[a, b] = sum_rest conj(self)[a, rest] other[b, rest]``."""
        a = self._view(sites).transpose(1, 0, 2).reshape(self.d ** len(sites), -1)
        b = other._view(sites).transpose(1, 0, 2).reshape(a.shape[0], -1)
        return a.conj() @ b.T


class _MPSState:
    def __init__(self, s: MPS, max_bond: int | None, cutoff: float):
        self.s = s.shallow_copy()
        if self.s.center is None:
            self.s.canonicalize(0)
        self.max_bond, self.cutoff = max_bond, cutoff
        self.discarded = 0.0
        self.dirty = (0, self.s.nsites - 1)

    @property
    def n(self) -> int:
        return self.s.nsites

    def copy(self) -> "_MPSState":
        out = _MPSState.__new__(_MPSState)
        out.s = self.s.shallow_copy()
        out.max_bond, out.cutoff, out.discarded = self.max_bond, self.cutoff, self.discarded
        out.dirty = self.dirty
        return out

    def _touch(self, lo: int, hi: int) -> None:
        a, b = self.dirty if self.dirty else (lo, hi)
        self.dirty = (min(a, lo), max(b, hi))

    def apply(self, u: np.ndarray, sites) -> None:
        s = self.s
        j = sites[0]
        if len(sites) == 1:
            s.tensors[j] = np.einsum("ab,lbr->lar", u, s.tensors[j])
            self._touch(j, j)
            return
        c0 = s.center
        s.move_center(j)
        self._touch(min(c0, j), max(c0, j + 1))
        a, b = s.tensors[j], s.tensors[j + 1]
        d = a.shape[1]
        th = np.tensordot(a, b, axes=(2, 0))  # (l, d, d, r)
        th = np.einsum("ab,lbr->lar", u, th.reshape(a.shape[0], d * d, b.shape[2]))
        th = th.reshape(a.shape[0], d, d, b.shape[2])
        uu, sv, vh, w = svd_truncate(th, 2, self.max_bond, self.cutoff)
        s.tensors[j] = uu
        s.tensors[j + 1] = sv[:, None, None] * vh
        s.center = j + 1
        self.discarded += w

    def overlap(self, other: "_MPSState") -> complex:
        env = np.ones((1, 1), dtype=complex)
        for ta, tb in zip(self.s.tensors, other.s.tensors):
            env = np.tensordot(env, ta.conj(), axes=(0, 0))
            env = np.tensordot(env, tb, axes=([0, 1], [0, 1]))
        return complex(env[0, 0])


class _MPSTransition:
    """Cached left/right transition environments between two MPS states."""

    def __init__(self, bra: _MPSState, ket: _MPSState):
        self.bra, self.ket = bra, ket
        n = bra.n
        self.left: list[np.ndarray | None] = [None] * (n + 1)
        self.right: list[np.ndarray | None] = [None] * (n + 1)
        self.left[0] = np.ones((1, 1), dtype=complex)
        self.right[n] = np.ones((1, 1), dtype=complex)

    def _sync(self) -> None:
        lo, hi = None, None
        for st in (self.bra, self.ket):
            if st.dirty:
                lo = st.dirty[0] if lo is None else min(lo, st.dirty[0])
                hi = st.dirty[1] if hi is None else max(hi, st.dirty[1])
                st.dirty = None
        if lo is None:
            return
        for k in range(lo + 1, len(self.left)):
            self.left[k] = None
        for k in range(0, hi + 1):
            self.right[k] = None

    def _l(self, k: int) -> np.ndarray:
        if self.left[k] is None:
            j = k - 1
            while self.left[j] is None:
                j -= 1
            env = self.left[j]
            for m in range(j, k):
                env = np.tensordot(env, self.bra.s.tensors[m].conj(), axes=(0, 0))
                env = np.tensordot(env, self.ket.s.tensors[m], axes=([0, 1], [0, 1]))
                self.left[m + 1] = env
        return self.left[k]

    def _r(self, k: int) -> np.ndarray:
        if self.right[k] is None:
            j = k + 1
            while self.right[j] is None:
                j += 1
            env = self.right[j]
            for m in range(j - 1, k - 1, -1):
                env = np.tensordot(self.bra.s.tensors[m].conj(), env, axes=(2, 0))  # (l, d, r_ket)
                env = np.tensordot(env, self.ket.s.tensors[m], axes=([1, 2], [1, 2]))
                self.right[m] = env
        return self.right[k]

    def transition(self, sites) -> np.ndarray:
        self._sync()
        j, k = sites[0], len(sites)
        le, re = self._l(j), self._r(j + k)
        bra, ket = self.bra.s.tensors, self.ket.s.tensors
        if k == 1:
            x = np.tensordot(le, bra[j].conj(), axes=(0, 0))  # (kl, a, br)
            x = np.tensordot(x, ket[j], axes=(0, 0))  # (a, br, b, kr)
            return np.einsum("apbq,pq->ab", x, re)
        bt = np.tensordot(bra[j], bra[j + 1], axes=(2, 0))  # (l, d, d, r)
        kt = np.tensordot(ket[j], ket[j + 1], axes=(2, 0))
        d = bt.shape[1]
        bt = bt.reshape(bt.shape[0], d * d, bt.shape[3])
        kt = kt.reshape(kt.shape[0], d * d, kt.shape[3])
        x = np.tensordot(le, bt.conj(), axes=(0, 0))  # (kl, a, br)
        x = np.tensordot(x, kt, axes=(0, 0))  # (a, br, b, kr)
        return np.einsum("apbq,pq->ab", x, re)


# application ----------------------------------------------------------------


def _identity_vectorized_mps(n: int) -> MPS:
    v = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)
    s = MPS.product_state([v] * n)
    s.canonicalize(0)
    return s


def _mps_of_operator(o: MPO) -> MPS:
    s = o.to_mps().copy()
    s.canonicalize(0)
    return s


def apply_circuit(
    c: Circuit,
    s: MPS | MPO,
    max_bond: int | None = None,
    cutoff: float = DEFAULT_CUTOFF,
) -> MPS | MPO:
    """Apply every gate of ``c`` in order.

    An MPS input is evolved directly; an MPO input ``X`` is mapped to ``U X``.
    Two-site blocks use contraction and an SVD split truncated by
    ``max_bond``/``cutoff``; the relative discarded weight accumulates in
    ``result.discarded`` (MPS only).
    """
    if s.nsites != c.nsites:
        raise ValidationError(f"circuit has {c.nsites} sites, state has {s.nsites}")
    vectorized = isinstance(s, MPO)
    st = _MPSState(_mps_of_operator(s) if vectorized else s, max_bond, cutoff)
    for b in c.blocks:
        u = b.unitary(c.theta)
        st.apply(_lift(u, len(b.sites)) if vectorized else u, b.sites)
    out = st.s
    out.discarded = [st.discarded]
    out.truncation_warning = st.discarded > cutoff
    if vectorized:
        return MPO([t.reshape(t.shape[0], 2, 2, t.shape[2]) for t in out.tensors])
    return out


def apply_circuit_dense(c: Circuit, vec: np.ndarray) -> np.ndarray:
    """Statevector simulation of ``c`` (no MPS involved)."""
    st = _DenseState(vec, c.nsites, 2)
    for b in c.blocks:
        st.apply(b.unitary(c.theta), b.sites)
    return st.v


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Full ``2^N x 2^N`` unitary, column by column."""
    dim = 2**c.nsites
    return np.column_stack([apply_circuit_dense(c, np.eye(dim, dtype=complex)[:, k]) for k in range(dim)])


# cost and gradient ----------------------------------------------------------


def cost_and_gradient(
    c: Circuit,
    target,
    mode: str = "pure-state",
    psi=None,
    backend: str = "mps",
    max_bond: int | None = None,
    cutoff: float = DEFAULT_CUTOFF,
) -> tuple[float, np.ndarray]:
    """``C(theta) = -Re <target| U(theta) |psi> / norm`` and its exact gradient.

    In pure-state mode ``target = (W - i tau lam_dot A) U_prev |psi>`` is a
    precomputed state and ``norm = <psi|psi>``, which equals
    ``-Re tr[U^dag (W - i tau lam_dot A) U_prev rho^2] / tr[rho^2]`` for
    ``rho = |psi><psi| / <psi|psi>``. In trace mode ``target`` is the operator
    ``V = (W - i tau lam_dot A) U_prev`` and the cost is ``-Re tr[U^dag V] / 2^N``.

    The gradient uses a reversible adjoint sweep: the forward state is run
    back through each block while the target is pulled back, and the block's
    derivative unitaries are contracted against the two-site transition matrix.

    Args:
        c: Circuit with the current ``theta``.
        target: MPS (pure-state) or MPO (trace); dense arrays with ``backend="dense"``.
        mode: ``"pure-state"`` or ``"trace"``.
        psi: Initial state for pure-state mode.
        backend: ``"mps"`` or ``"dense"``.
        max_bond: Bond cap for MPS block splits.
        cutoff: Relative discarded-weight cutoff for MPS block splits.

    Returns:
        ``(cost, grad)`` with ``grad`` of length ``c.num_params``.
    """
    n = c.nsites
    if mode == "pure-state":
        if psi is None:
            raise ValueError("pure-state mode requires an initial state psi")
        d = 2
    elif mode == "trace":
        d = 4
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if backend == "dense":
        if mode == "pure-state":
            phi = _DenseState(psi, n, 2)
            chi = _DenseState(target, n, 2)
        else:
            eye = np.eye(2**n, dtype=complex).reshape((2,) * (2 * n))
            perm = [x for k in range(n) for x in (k, n + k)]
            phi = _DenseState(eye.transpose(perm), n, 4)
            tgt = np.asarray(target, dtype=complex).reshape((2,) * (2 * n)).transpose(perm)
            chi = _DenseState(tgt, n, 4)
        norm = float(np.real(phi.overlap(phi)))
        trans = lambda sites: chi.transition(phi, sites)  # noqa: E731
    elif backend == "mps":
        if mode == "pure-state":
            phi = _MPSState(psi, max_bond, cutoff)
            chi = _MPSState(target, max_bond, cutoff)
        else:
            phi = _MPSState(_identity_vectorized_mps(n), max_bond, cutoff)
            chi = _MPSState(_mps_of_operator(target), max_bond, cutoff)
        norm = float(np.real(phi.overlap(phi)))
        env = _MPSTransition(chi, phi)
        trans = env.transition
    else:
        raise ValueError(f"unknown backend {backend!r}")

    units = []
    for b in c.blocks:
        u, du = b.unitary(c.theta, with_derivatives=True)
        if d == 4:
            u = _lift(u, len(b.sites))
            du = [(k, _lift(m, len(b.sites))) for k, m in du]
        units.append((b.sites, u, du))
        phi.apply(u, b.sites)
    if backend == "mps":
        env = _MPSTransition(chi, phi)
        trans = env.transition
    cost = -float(np.real(chi.overlap(phi))) / norm

    grad = np.zeros(c.num_params)
    for sites, u, du in reversed(units):
        phi.apply(u.conj().T, sites)
        if du:
            m = trans(sites)
            for k, dm in du:
                grad[k] -= float(np.real(np.sum(dm * m))) / norm
        chi.apply(u.conj().T, sites)
    return cost, grad
