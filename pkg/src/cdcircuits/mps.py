"""Open-boundary matrix product states and operators.

MPS site tensors have shape ``(left, phys, right)``; MPO site tensors have shape
``(left, out, in, right)``. Dense vectors and matrices use site 0 as the most
significant tensor factor. An MPO can be viewed as an MPS over the doubled
physical index ``out * d + in`` (its vectorization), which is how compression,
addition and Hilbert-Schmidt inner products of operators are implemented.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .tensor import svd_truncate

__all__ = [
    "MPS",
    "MPO",
    "inner",
    "expval",
    "mpo_apply",
    "mpo_apply_dense",
    "mpo_mpo_mul",
    "mpo_add",
    "mps_add",
    "mpo_trace_product",
    "entanglement_entropy",
    "schmidt_values",
    "save_tensor_train",
    "load_tensor_train",
]

DEFAULT_CUTOFF = 1e-20


@dataclass
class MPS:
    """Matrix product state.

    Attributes:
        tensors: Site tensors of shape ``(left, phys, right)``.
        center: Orthogonality center, or ``None`` when no gauge is guaranteed.
        discarded: Relative discarded weight per bond from the last truncating operation.
        truncation_warning: Set when a bond cap forced truncation beyond ``cutoff``.
    """

    tensors: list[np.ndarray]
    center: int | None = None
    discarded: list[float] = field(default_factory=list)
    truncation_warning: bool = False

    def __post_init__(self) -> None:
        self.tensors = [np.asarray(t) for t in self.tensors]
        if not self.tensors:
            raise ValueError("an MPS needs at least one site")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[-1] != 1:
            raise ValueError("boundary bonds must have extent 1")
        for a, b in zip(self.tensors[:-1], self.tensors[1:]):
            if a.shape[-1] != b.shape[0]:
                raise ValueError(f"bond mismatch {a.shape} -> {b.shape}")

    # construction -------------------------------------------------------
    @classmethod
    def product_state(cls, local_states: Sequence[np.ndarray]) -> "MPS":
        ts = [np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in local_states]
        return cls(ts, center=None)

    @classmethod
    def computational(cls, bits: Sequence[int] | str) -> "MPS":
        vs = []
        for b in bits:
            v = np.zeros(2, dtype=complex)
            v[int(b)] = 1.0
            vs.append(v)
        return cls.product_state(vs)

    @classmethod
    def from_dense(cls, vec: np.ndarray, nsites: int, d: int = 2, cutoff: float = 0.0, max_bond: int | None = None) -> "MPS":
        vec = np.asarray(vec, dtype=complex).reshape((d,) * nsites)
        tensors = []
        rest = vec.reshape(1, -1)
        for _ in range(nsites - 1):
            left = rest.shape[0]
            m = rest.reshape(left, d, -1)
            u, s, vh, _ = svd_truncate(m, 2, max_bond, cutoff)
            tensors.append(u)
            rest = (s[:, None] * vh)
        tensors.append(rest.reshape(rest.shape[0], d, 1))
        return cls(tensors, center=nsites - 1)

    @classmethod
    def random(cls, nsites: int, bond: int, rng: np.random.Generator, d: int = 2, normalize: bool = True) -> "MPS":
        dims = _capped_bonds(nsites, bond, d)
        ts = [
            rng.normal(size=(dims[k], d, dims[k + 1])) + 1j * rng.normal(size=(dims[k], d, dims[k + 1]))
            for k in range(nsites)
        ]
        s = cls(ts)
        if normalize:
            s.normalize()
        return s

    # properties ---------------------------------------------------------
    @property
    def nsites(self) -> int:
        return len(self.tensors)

    @property
    def phys_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    def bond_dims(self) -> list[int]:
        return [t.shape[-1] for t in self.tensors[:-1]]

    def max_bond(self) -> int:
        return max(self.bond_dims(), default=1)

    def copy(self) -> "MPS":
        return MPS([t.copy() for t in self.tensors], self.center, list(self.discarded), self.truncation_warning)

    def shallow_copy(self) -> "MPS":
        out = MPS.__new__(MPS)
        out.tensors = list(self.tensors)
        out.center = self.center
        out.discarded = list(self.discarded)
        out.truncation_warning = self.truncation_warning
        return out

    def to_dense(self) -> np.ndarray:
        v = self.tensors[0]
        for t in self.tensors[1:]:
            v = np.tensordot(v, t, axes=(-1, 0))
        return v.reshape(-1)

    def conj(self) -> "MPS":
        return MPS([t.conj() for t in self.tensors], self.center)

    def scale(self, c: complex) -> "MPS":
        out = self.shallow_copy()
        k = out.center if out.center is not None else 0
        out.tensors[k] = out.tensors[k] * c
        return out

    # gauge ----------------------------------------------------------------
    def canonicalize(self, center: int = 0) -> "MPS":
        """Bring the state into mixed-canonical form about ``center`` in place."""
        n = self.nsites
        if not 0 <= center < n:
            raise IndexError(f"center {center} out of range for {n} sites")
        if self.center is None:
            lo, hi = 0, n - 1
        else:
            lo = hi = self.center
        for k in range(lo, center):
            self._move_right(k)
        for k in range(hi, center, -1):
            self._move_left(k)
        self.center = center
        return self

    def _move_right(self, k: int) -> None:
        t = self.tensors[k]
        l, d, r = t.shape
        q, rr = np.linalg.qr(t.reshape(l * d, r))
        self.tensors[k] = q.reshape(l, d, q.shape[1])
        self.tensors[k + 1] = np.tensordot(rr, self.tensors[k + 1], axes=(1, 0))

    def _move_left(self, k: int) -> None:
        t = self.tensors[k]
        l, d, r = t.shape
        q, rr = np.linalg.qr(t.reshape(l, d * r).T)
        self.tensors[k] = q.T.reshape(q.shape[1], d, r)
        self.tensors[k - 1] = np.tensordot(self.tensors[k - 1], rr.T, axes=(-1, 0))

    def move_center(self, k: int) -> "MPS":
        if self.center is None:
            return self.canonicalize(k)
        while self.center < k:
            self._move_right(self.center)
            self.center += 1
        while self.center > k:
            self._move_left(self.center)
            self.center -= 1
        return self

    def is_canonical(self, tol: float = 1e-10) -> bool:
        if self.center is None:
            return False
        for k, t in enumerate(self.tensors):
            l, d, r = t.shape
            if k < self.center:
                m = t.reshape(l * d, r)
                if np.max(np.abs(m.conj().T @ m - np.eye(r))) > tol:
                    return False
            elif k > self.center:
                m = t.reshape(l, d * r)
                if np.max(np.abs(m @ m.conj().T - np.eye(l))) > tol:
                    return False
        return True

    def norm(self) -> float:
        if self.center is not None:
            return float(np.linalg.norm(self.tensors[self.center]))
        return float(np.sqrt(abs(inner(self, self))))

    def normalize(self) -> "MPS":
        if self.center is None:
            self.canonicalize(0)
        nrm = np.linalg.norm(self.tensors[self.center])
        if nrm == 0:
            raise ValidationError("cannot normalize a zero state")
        self.tensors[self.center] = self.tensors[self.center] / nrm
        return self

    def compress(self, max_bond: int | None = None, cutoff: float = DEFAULT_CUTOFF) -> list[float]:
        """SVD truncation sweep (right to left after a left-canonical sweep).

        Returns the relative discarded weight per bond; also stored on ``self``.
        """
        n = self.nsites
        self.canonicalize(n - 1)
        disc = [0.0] * (n - 1)
        warn = False
        for k in range(n - 1, 0, -1):
            t = self.tensors[k]
            u, s, vh, w = svd_truncate(t, 1, max_bond, cutoff)
            if max_bond is not None and len(s) == max_bond and w > cutoff:
                warn = True
            self.tensors[k] = vh
            self.tensors[k - 1] = np.tensordot(self.tensors[k - 1], u * s, axes=(-1, 0))
            disc[k - 1] = w
        self.center = 0
        self.discarded = disc
        self.truncation_warning = warn
        return disc


def _capped_bonds(nsites: int, bond: int, d: int) -> list[int]:
    dims = [1]
    for k in range(1, nsites):
        dims.append(int(min(bond, d ** min(k, nsites - k))))
    dims.append(1)
    return dims


@dataclass
class MPO:
    """Matrix product operator with site tensors ``(left, out, in, right)``."""

    tensors: list[np.ndarray]

    def __post_init__(self) -> None:
        self.tensors = [np.asarray(t) for t in self.tensors]
        if not self.tensors:
            raise ValueError("an MPO needs at least one site")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[-1] != 1:
            raise ValueError("boundary bonds must have extent 1")
        for a, b in zip(self.tensors[:-1], self.tensors[1:]):
            if a.shape[-1] != b.shape[0]:
                raise ValueError(f"bond mismatch {a.shape} -> {b.shape}")

    @classmethod
    def identity(cls, nsites: int, d: int = 2) -> "MPO":
        return cls([np.eye(d, dtype=complex).reshape(1, d, d, 1) for _ in range(nsites)])

    @classmethod
    def zero(cls, nsites: int, d: int = 2) -> "MPO":
        return cls([np.zeros((1, d, d, 1), dtype=complex) for _ in range(nsites)])

    @classmethod
    def product(cls, local_ops: Sequence[np.ndarray], coeff: complex = 1.0) -> "MPO":
        ts = [np.asarray(o, dtype=complex).reshape(1, o.shape[0], o.shape[1], 1) for o in local_ops]
        ts[0] = ts[0] * coeff
        return cls(ts)

    @classmethod
    def from_dense(cls, mat: np.ndarray, nsites: int, d: int = 2, cutoff: float = DEFAULT_CUTOFF) -> "MPO":
        mat = np.asarray(mat, dtype=complex).reshape((d,) * (2 * nsites))
        perm = [x for k in range(nsites) for x in (k, nsites + k)]
        vec = mat.transpose(perm).reshape(-1)
        return cls.from_mps(MPS.from_dense(vec, nsites, d * d, cutoff=cutoff))

    @classmethod
    def from_mps(cls, s: MPS) -> "MPO":
        out = []
        for t in s.tensors:
            l, dd, r = t.shape
            d = int(round(np.sqrt(dd)))
            out.append(t.reshape(l, d, d, r))
        return cls(out)

    @classmethod
    def random(cls, nsites: int, bond: int, rng: np.random.Generator, d: int = 2) -> "MPO":
        return cls.from_mps(MPS.random(nsites, bond, rng, d=d * d, normalize=False))

    @property
    def nsites(self) -> int:
        return len(self.tensors)

    def bond_dims(self) -> list[int]:
        return [t.shape[-1] for t in self.tensors[:-1]]

    def max_bond(self) -> int:
        return max(self.bond_dims(), default=1)

    def copy(self) -> "MPO":
        return MPO([t.copy() for t in self.tensors])

    def to_mps(self) -> MPS:
        return MPS([t.reshape(t.shape[0], t.shape[1] * t.shape[2], t.shape[3]) for t in self.tensors])

    def to_dense(self) -> np.ndarray:
        n = self.nsites
        v = self.tensors[0]
        for t in self.tensors[1:]:
            v = np.tensordot(v, t, axes=(-1, 0))
        v = v.reshape(v.shape[1:-1])
        perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
        d = self.tensors[0].shape[1]
        return v.transpose(perm).reshape(d**n, d**n)

    def dagger(self) -> "MPO":
        return MPO([t.conj().transpose(0, 2, 1, 3) for t in self.tensors])

    def transpose(self) -> "MPO":
        return MPO([t.transpose(0, 2, 1, 3) for t in self.tensors])

    def scale(self, c: complex) -> "MPO":
        ts = list(self.tensors)
        ts[0] = ts[0] * c
        return MPO(ts)

    def __mul__(self, c: complex) -> "MPO":
        return self.scale(c)

    __rmul__ = __mul__

    def __add__(self, other: "MPO") -> "MPO":
        return mpo_add(self, other)

    def __sub__(self, other: "MPO") -> "MPO":
        return mpo_add(self, other.scale(-1.0))

    def __matmul__(self, other: "MPO") -> "MPO":
        return mpo_mpo_mul(self, other)

    def compress(self, max_bond: int | None = None, cutoff: float = DEFAULT_CUTOFF) -> "MPO":
        s = self.to_mps()
        s.compress(max_bond, cutoff)
        return MPO.from_mps(s)

    def frobenius_norm(self) -> float:
        # QR sweep keeps the norm backward-stable even for nearly cancelling sums
        s = self.to_mps().canonicalize(self.nsites - 1)
        return float(np.linalg.norm(s.tensors[-1]))

    def hermitian_part(self, cutoff: float = DEFAULT_CUTOFF) -> "MPO":
        return mpo_add(self.scale(0.5), self.dagger().scale(0.5)).compress(cutoff=cutoff)

    def hermitian_defect(self) -> float:
        """``||A - A^dag||_F / ||A||_F`` (0 for the zero operator)."""
        nrm = self.frobenius_norm()
        if nrm == 0:
            return 0.0
        return mpo_add(self, self.dagger().scale(-1.0)).frobenius_norm() / nrm


def _check_n(a, b) -> None:
    if a.nsites != b.nsites:
        raise ValueError(f"size mismatch: {a.nsites} vs {b.nsites} sites")


def inner(a: MPS, b: MPS) -> complex:
    """``<a|b>`` by exact transfer-matrix contraction."""
    _check_n(a, b)
    env = np.ones((1, 1), dtype=complex)
    for ta, tb in zip(a.tensors, b.tensors):
        env = np.tensordot(env, ta.conj(), axes=(0, 0))  # (Db, d, Da')
        env = np.tensordot(env, tb, axes=([0, 1], [0, 1]))  # (Da', Db')
    return complex(env[0, 0])


def expval(s: MPS, o: MPO) -> complex:
    """``<s|O|s>`` (not divided by the norm)."""
    _check_n(s, o)
    env = np.ones((1, 1, 1), dtype=complex)
    for ts, to in zip(s.tensors, o.tensors):
        env = np.tensordot(env, ts.conj(), axes=(0, 0))  # (w, k, i, a')
        env = np.tensordot(env, to, axes=([0, 2], [0, 1]))  # (k, a', j, w')
        env = np.tensordot(env, ts, axes=([0, 2], [0, 1]))  # (a', w', k')
    return complex(env[0, 0, 0])


def _apply_exact(w: MPO, s: MPS) -> MPS:
    ts = []
    for tw, tt in zip(w.tensors, s.tensors):
        x = np.tensordot(tw, tt, axes=(2, 1))  # (wl, o, wr, sl, sr)
        x = x.transpose(0, 3, 1, 2, 4)
        ts.append(x.reshape(tw.shape[0] * tt.shape[0], tw.shape[1], tw.shape[3] * tt.shape[2]))
    return MPS(ts)


def mpo_apply(w: MPO, s: MPS, max_bond: int | None = None, cutoff: float = DEFAULT_CUTOFF) -> MPS:
    """Apply ``w`` to ``s`` then compress; discarded weights are kept on the result."""
    _check_n(w, s)
    out = _apply_exact(w, s)
    out.compress(max_bond, cutoff)
    return out


def mpo_apply_dense(w: MPO, vec: np.ndarray) -> np.ndarray:
    """``w @ vec`` for a dense vector, contracting one site at a time.

    Never forms the ``d^N x d^N`` matrix; memory stays at ``O(D d^N)``.
    """
    d = w.tensors[0].shape[2]
    x = np.asarray(vec, dtype=complex).reshape(1, 1, -1)  # (done, bond, rest)
    for t in w.tensors:
        done, bond, rest = x.shape
        x = x.reshape(done, bond, d, rest // d)
        y = np.tensordot(x, t, axes=([1, 2], [0, 2]))  # (done, rest', out, r)
        x = y.transpose(0, 2, 3, 1).reshape(done * t.shape[1], t.shape[3], rest // d)
    return x.reshape(-1)


def _mul_exact(a: MPO, b: MPO) -> MPO:
    ts = []
    for ta, tb in zip(a.tensors, b.tensors):
        x = np.tensordot(ta, tb, axes=(2, 1))  # (al, o, ar, bl, i, br)
        x = x.transpose(0, 3, 1, 4, 2, 5)
        ts.append(x.reshape(ta.shape[0] * tb.shape[0], ta.shape[1], tb.shape[2], ta.shape[3] * tb.shape[3]))
    return MPO(ts)


def mpo_mpo_mul(a: MPO, b: MPO, max_bond: int | None = None, cutoff: float = DEFAULT_CUTOFF) -> MPO:
    """Operator product ``a @ b``, compressed."""
    _check_n(a, b)
    return _mul_exact(a, b).compress(max_bond, cutoff)


def _direct_sum(ta_list: list[np.ndarray], tb_list: list[np.ndarray]) -> list[np.ndarray]:
    n = len(ta_list)
    out = []
    for k, (ta, tb) in enumerate(zip(ta_list, tb_list)):
        mid = ta.shape[1:-1]
        dtype = np.result_type(ta, tb)
        if n == 1:
            out.append(ta + tb)
        elif k == 0:
            out.append(np.concatenate([ta, tb], axis=-1).astype(dtype))
        elif k == n - 1:
            out.append(np.concatenate([ta, tb], axis=0).astype(dtype))
        else:
            x = np.zeros((ta.shape[0] + tb.shape[0],) + mid + (ta.shape[-1] + tb.shape[-1],), dtype=dtype)
            x[: ta.shape[0], ..., : ta.shape[-1]] = ta
            x[ta.shape[0]:, ..., ta.shape[-1]:] = tb
            out.append(x)
    return out


def mpo_add(a: MPO, b: MPO) -> MPO:
    """Exact sum by direct-sum bonds (bond dimension is the sum of the inputs)."""
    _check_n(a, b)
    return MPO(_direct_sum(a.tensors, b.tensors))


def mps_add(a: MPS, b: MPS) -> MPS:
    _check_n(a, b)
    return MPS(_direct_sum(a.tensors, b.tensors))


def mpo_sum(ops: Iterable[MPO], cutoff: float = DEFAULT_CUTOFF, max_bond: int | None = None) -> MPO:
    """Sum of several MPOs with compression after every addition."""
    acc = None
    for o in ops:
        acc = o if acc is None else mpo_add(acc, o).compress(max_bond, cutoff)
    if acc is None:
        raise ValueError("empty sum")
    return acc


def mpo_trace_product(ops: Sequence[MPO]) -> complex:
    """``tr[O_1 O_2 ... O_n]`` by exact ladder contraction."""
    ops = list(ops)
    if not ops:
        raise ValueError("need at least one operator")
    n = ops[0].nsites
    for o in ops[1:]:
        _check_n(ops[0], o)
    m = len(ops)
    env = np.ones((1,) * m, dtype=complex)
    letters = "abcdefghijklmnopqrstuvwxyz"
    # bond labels: A..; physical cycle labels: lowercase
    for k in range(n):
        bl = [chr(ord("A") + j) for j in range(m)]
        br = [chr(ord("A") + m + j) for j in range(m)]
        phys = [letters[j] for j in range(m)]
        terms = ["".join(bl)]
        for j in range(m):
            terms.append(bl[j] + phys[j] + phys[(j + 1) % m] + br[j])
        spec = ",".join(terms) + "->" + "".join(br)
        env = np.einsum(spec, env, *[o.tensors[k] for o in ops], optimize=True)
    return complex(env.reshape(-1)[0])


def schmidt_values(s: MPS, bond: int) -> np.ndarray:
    """Schmidt coefficients across the cut between sites ``bond`` and ``bond + 1``."""
    if not 0 <= bond < s.nsites - 1:
        raise IndexError(f"bond {bond} out of range")
    c = s.copy().canonicalize(bond)
    t = c.tensors[bond]
    return np.linalg.svd(t.reshape(-1, t.shape[-1]), compute_uv=False)


def entanglement_entropy(s: MPS, bond: int | None = None, tol: float = 1e-8) -> float:
    """Von Neumann entropy ``-sum p ln p`` of the squared Schmidt weights at a bond.

    ``bond`` defaults to the central cut.
    """
    if bond is None:
        bond = s.nsites // 2 - 1
    sv = schmidt_values(s, bond)
    p = sv**2
    total = float(p.sum())
    if abs(total - 1.0) > tol:
        raise ValidationError(f"state is not normalized (norm^2 = {total})")
    p = p[p > 1e-300]
    # a single weight of 1 - O(eps) would give a tiny negative value
    return max(0.0, float(-(p * np.log(p)).sum()))


# serialization ------------------------------------------------------------
def save_tensor_train(obj: MPS | MPO, path: str | Path) -> Path:
    """Write ``<path>.json`` (manifest) and ``<path>.bin`` (little-endian re/im float64 pairs)."""
    path = Path(path)
    kind = "mpo" if isinstance(obj, MPO) else "mps"
    shapes = [list(t.shape) for t in obj.tensors]
    payload = path.with_suffix(".bin")
    with open(payload, "wb") as fh:
        for t in obj.tensors:
            c = np.ascontiguousarray(t, dtype=np.complex128)
            fh.write(c.view(np.float64).astype("<f8").tobytes())
    manifest = {
        "format": "cdcircuits-tensor-train",
        "version": 1,
        "kind": kind,
        "nsites": obj.nsites,
        "shapes": shapes,
        "bond_dims": obj.bond_dims(),
        "endianness": "little",
        "dtype": "complex128 as interleaved float64 (re, im)",
        "payload": payload.name,
    }
    if kind == "mps":
        manifest["center"] = obj.center
    mpath = path.with_suffix(".json")
    mpath.write_text(json.dumps(manifest, indent=2))
    return mpath


def load_tensor_train(path: str | Path) -> MPS | MPO:
    mpath = Path(path).with_suffix(".json")
    manifest = json.loads(mpath.read_text())
    if manifest.get("endianness") != "little":
        raise ValueError("only little-endian payloads are supported")
    raw = np.frombuffer((mpath.parent / manifest["payload"]).read_bytes(), dtype="<f8")
    tensors = []
    pos = 0
    for shape in manifest["shapes"]:
        size = int(np.prod(shape))
        chunk = raw[pos: pos + 2 * size].astype(np.float64)
        tensors.append(chunk.view(np.complex128).reshape(shape).copy())
        pos += 2 * size
    if manifest["kind"] == "mpo":
        return MPO(tensors)
    return MPS(tensors, center=manifest.get("center"))
