"""Weighted sums of Pauli strings.

Strings are stored in the symplectic (x, z) bit representation, one bit per
site, so products of large sums are evaluated with vectorized bit operations.
Site ``k`` of a string corresponds to bit ``k`` of the masks and to the
``k``-th character of the text form (``"XIZ"`` has X on site 0).

The phase convention is ``P(x, z) = i^{x.z} X^x Z^z`` per site, so that
``(1, 1)`` is exactly ``Y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import ResourceError

__all__ = [
    "PauliSum",
    "pauli_mul",
    "commutator",
    "nested_commutator",
    "ising_pauli_sum",
    "PRUNE_TOL",
]

PRUNE_TOL = 1e-14
MAX_SITES = 64
DEFAULT_TERM_CAP = 5_000_000

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}
_SORT_RANK = {"I": 0, "X": 1, "Y": 2, "Z": 3}

_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_IPOW = np.array([1, 1j, -1, -1j], dtype=complex)


def _popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a).astype(np.int64)


def _string_to_bits(s: str) -> tuple[int, int]:
    x = z = 0
    for k, ch in enumerate(s):
        try:
            bx, bz = _LETTER_BITS[ch]
        except KeyError:
            raise ValueError(f"invalid Pauli letter {ch!r} in {s!r}") from None
        x |= bx << k
        z |= bz << k
    return x, z


def _bits_to_string(x: int, z: int, n: int) -> str:
    return "".join(_BITS_LETTER[((x >> k) & 1, (z >> k) & 1)] for k in range(n))


@dataclass
class PauliSum:
    """Sum of Pauli strings with complex coefficients on ``nsites`` qubits."""

    nsites: int
    x: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint64))
    z: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint64))
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def __post_init__(self) -> None:
        if not 1 <= self.nsites <= MAX_SITES:
            raise ValueError(f"nsites must be in [1, {MAX_SITES}], got {self.nsites}")
        self.x = np.asarray(self.x, dtype=np.uint64)
        self.z = np.asarray(self.z, dtype=np.uint64)
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if not (self.x.shape == self.z.shape == self.coeffs.shape):
            raise ValueError("x, z and coeffs must have equal length")

    # construction -------------------------------------------------------
    @classmethod
    def from_terms(cls, terms: Mapping[str, complex] | Iterable[tuple[str, complex]], nsites: int | None = None) -> "PauliSum":
        items = list(terms.items()) if isinstance(terms, Mapping) else list(terms)
        if nsites is None:
            if not items:
                raise ValueError("nsites is required for an empty sum")
            nsites = len(items[0][0])
        xs, zs, cs = [], [], []
        for s, c in items:
            if len(s) != nsites:
                raise ValueError(f"string {s!r} does not have length {nsites}")
            x, z = _string_to_bits(s)
            xs.append(x)
            zs.append(z)
            cs.append(c)
        return cls(nsites, np.array(xs, dtype=np.uint64), np.array(zs, dtype=np.uint64), np.array(cs, dtype=complex)).simplify()

    @classmethod
    def single(cls, nsites: int, ops: Mapping[int, str], coeff: complex = 1.0) -> "PauliSum":
        """One string with the given site -> letter assignment, identity elsewhere."""
        letters = ["I"] * nsites
        for k, p in ops.items():
            letters[k] = p
        return cls.from_terms([("".join(letters), coeff)], nsites)

    @classmethod
    def zero(cls, nsites: int) -> "PauliSum":
        return cls(nsites)

    @classmethod
    def identity(cls, nsites: int, coeff: complex = 1.0) -> "PauliSum":
        return cls.single(nsites, {}, coeff)

    # basic protocol -----------------------------------------------------
    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def terms(self) -> dict[str, complex]:
        return {s: c for s, c in self.items()}

    def items(self) -> list[tuple[str, complex]]:
        """Terms in canonical (lexicographic, I<X<Y<Z) order."""
        out = [(_bits_to_string(int(x), int(z), self.nsites), complex(c)) for x, z, c in zip(self.x, self.z, self.coeffs)]
        out.sort(key=lambda t: [_SORT_RANK[ch] for ch in t[0]])
        return out

    def copy(self) -> "PauliSum":
        return PauliSum(self.nsites, self.x.copy(), self.z.copy(), self.coeffs.copy())

    def simplify(self, tol: float = PRUNE_TOL) -> "PauliSum":
        if len(self) == 0:
            return PauliSum(self.nsites)
        if self.nsites <= 32:
            packed = (self.x << np.uint64(32)) | self.z
            uniq, inv = np.unique(packed, return_inverse=True)
            ux, uz = uniq >> np.uint64(32), uniq & np.uint64(0xFFFFFFFF)
        else:
            keys = np.stack([self.x, self.z], axis=1)
            uniq, inv = np.unique(keys, axis=0, return_inverse=True)
            ux, uz = uniq[:, 0], uniq[:, 1]
        inv = inv.ravel()
        coeffs = np.bincount(inv, weights=self.coeffs.real, minlength=len(ux)) + 1j * np.bincount(
            inv, weights=self.coeffs.imag, minlength=len(ux)
        )
        keep = np.abs(coeffs) >= tol
        return PauliSum(self.nsites, ux[keep], uz[keep], coeffs[keep])

    def __add__(self, other: "PauliSum") -> "PauliSum":
        _check_sizes(self, other)
        return PauliSum(
            self.nsites,
            np.concatenate([self.x, other.x]),
            np.concatenate([self.z, other.z]),
            np.concatenate([self.coeffs, other.coeffs]),
        ).simplify()

    def __neg__(self) -> "PauliSum":
        return PauliSum(self.nsites, self.x, self.z, -self.coeffs)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-other)

    def __mul__(self, other: "PauliSum | complex") -> "PauliSum":
        if isinstance(other, PauliSum):
            return pauli_mul(self, other)
        return PauliSum(self.nsites, self.x, self.z, self.coeffs * complex(other)).simplify()

    __rmul__ = __mul__

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        return pauli_mul(self, other)

    def dagger(self) -> "PauliSum":
        return PauliSum(self.nsites, self.x, self.z, self.coeffs.conj())

    def norm2(self) -> float:
        """Normalized Hilbert-Schmidt norm squared, tr[P^dag P] / 2^N."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def inner(self, other: "PauliSum") -> complex:
        """Normalized Hilbert-Schmidt inner product tr[self^dag other] / 2^N."""
        _check_sizes(self, other)
        if len(self) == 0 or len(other) == 0:
            return 0j
        a = dict(zip(zip(self.x.tolist(), self.z.tolist()), self.coeffs))
        tot = 0j
        for x, z, c in zip(other.x.tolist(), other.z.tolist(), other.coeffs):
            ca = a.get((x, z))
            if ca is not None:
                tot += np.conj(ca) * c
        return complex(tot)

    def allclose(self, other: "PauliSum", atol: float = 1e-12) -> bool:
        return (self - other).max_abs() <= atol

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if len(self) else 0.0

    def site_ops(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-term, per-site (x, z) bits as uint8 arrays of shape (terms, nsites)."""
        k = np.arange(self.nsites, dtype=np.uint64)
        xb = ((self.x[:, None] >> k) & np.uint64(1)).astype(np.uint8)
        zb = ((self.z[:, None] >> k) & np.uint64(1)).astype(np.uint8)
        return xb, zb

    def to_dense(self) -> np.ndarray:
        """Dense 2^N x 2^N matrix, site 0 as the most significant tensor factor."""
        if self.nsites > 14:
            raise ResourceError("dense conversion capped at 14 sites")
        dim = 2**self.nsites
        out = np.zeros((dim, dim), dtype=complex)
        for s, c in self.items():
            m = np.array([[1.0 + 0j]])
            for ch in s:
                m = np.kron(m, _PAULI_MATS[ch])
            out += c * m
        return out

    # serialization ------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"{c.real!r} {c.imag!r} {s}" for s, c in self.items()]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, nsites: int | None = None) -> "PauliSum":
        terms = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            re_, im_, s = line.split()
            terms.append((s, complex(float(re_), float(im_))))
        return cls.from_terms(terms, nsites)

    def __repr__(self) -> str:
        body = ", ".join(f"{c:.6g}*{s}" for s, c in self.items()[:6])
        more = "" if len(self) <= 6 else f", ... ({len(self)} terms)"
        return f"PauliSum(N={self.nsites}: {body}{more})"


def _check_sizes(a: PauliSum, b: PauliSum) -> None:
    if a.nsites != b.nsites:
        raise ValueError(f"size mismatch: {a.nsites} vs {b.nsites} sites")


def _product_phase(xa, za, xb, zb) -> np.ndarray:
    ya = xa & za
    xo = xa & ~za
    zo = za & ~xa
    yb = xb & zb
    xbo = xb & ~zb
    zbo = zb & ~xb
    plus = (ya & zbo) | (xo & yb) | (zo & xbo)
    minus = (ya & xbo) | (xo & zbo) | (zo & yb)
    return (_popcount(plus) - _popcount(minus)) % 4


def _raw_products(a: PauliSum, b: PauliSum, chunk: int = 1 << 22):
    """All pairwise products (unsimplified), yielded in chunks."""
    nb = len(b)
    if len(a) == 0 or nb == 0:
        return
    rows = max(1, chunk // nb)
    for start in range(0, len(a), rows):
        xa = a.x[start:start + rows, None]
        za = a.z[start:start + rows, None]
        ca = a.coeffs[start:start + rows, None]
        ph = _product_phase(xa, za, b.x[None, :], b.z[None, :])
        yield (xa ^ b.x[None, :]).ravel(), (za ^ b.z[None, :]).ravel(), (ca * b.coeffs[None, :] * _IPOW[ph]).ravel()


def pauli_mul(a: PauliSum, b: PauliSum) -> PauliSum:
    """Product ``a @ b`` with exact single-site phases, simplified."""
    _check_sizes(a, b)
    out = PauliSum(a.nsites)
    for x, z, c in _raw_products(a, b):
        out = PauliSum(a.nsites, np.concatenate([out.x, x]), np.concatenate([out.z, z]), np.concatenate([out.coeffs, c])).simplify()
    return out


def commutator(a: PauliSum, b: PauliSum, term_cap: int | None = None) -> PauliSum:
    """``a b - b a``, simplified.

    Two strings either commute (their commutator vanishes) or anticommute
    (the commutator is twice the product), so only anticommuting pairs are kept.
    """
    _check_sizes(a, b)
    out = PauliSum(a.nsites)
    for start_x, start_z, c, anti in _anticommuting_products(a, b):
        out = PauliSum(
            a.nsites,
            np.concatenate([out.x, start_x[anti]]),
            np.concatenate([out.z, start_z[anti]]),
            np.concatenate([out.coeffs, 2.0 * c[anti]]),
        ).simplify()
        if term_cap is not None and len(out) > term_cap:
            raise ResourceError(f"commutator exceeded term cap of {term_cap} terms")
    return out


def _anticommuting_products(a: PauliSum, b: PauliSum, chunk: int = 1 << 22):
    nb = len(b)
    if len(a) == 0 or nb == 0:
        return
    rows = max(1, chunk // nb)
    for start in range(0, len(a), rows):
        xa = a.x[start:start + rows, None]
        za = a.z[start:start + rows, None]
        ca = a.coeffs[start:start + rows, None]
        xb = b.x[None, :]
        zb = b.z[None, :]
        sym = (_popcount(xa & zb) + _popcount(za & xb)) % 2
        ph = _product_phase(xa, za, xb, zb)
        c = ca * b.coeffs[None, :] * _IPOW[ph]
        yield (xa ^ xb).ravel(), (za ^ zb).ravel(), c.ravel(), (sym == 1).ravel()


def nested_commutator(
    h: PauliSum, dh: PauliSum, depth: int, term_cap: int = DEFAULT_TERM_CAP
) -> PauliSum:
    """Left-nested commutator ``[h, [h, ... [h, dh]]]`` with ``depth`` applications of ``h``."""
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    out = dh
    for _ in range(depth):
        out = commutator(h, out, term_cap=term_cap)
        if len(out) > term_cap:
            raise ResourceError(f"nested commutator exceeded term cap of {term_cap} terms")
    return out


def ising_pauli_sum(J, g, h) -> PauliSum:
    """``sum_k J_k Z_k Z_{k+1} + sum_k g_k X_k + sum_k h_k Z_k`` as a Pauli sum."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    J = np.asarray(J, dtype=float)
    n = len(g)
    if len(h) != n or len(J) != max(n - 1, 0):
        raise ValueError("need len(J) == N-1 and len(g) == len(h) == N")
    terms = []
    for k in range(n - 1):
        terms.append((_letters(n, {k: "Z", k + 1: "Z"}), J[k]))
    for k in range(n):
        terms.append((_letters(n, {k: "X"}), g[k]))
        terms.append((_letters(n, {k: "Z"}), h[k]))
    return PauliSum.from_terms(terms, n)


def _letters(n: int, ops: Mapping[int, str]) -> str:
    s = ["I"] * n
    for k, p in ops.items():
        s[k] = p
    return "".join(s)
