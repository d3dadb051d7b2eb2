"""Dense tensor primitives: contraction, truncated SVD, Hermitian eigensolver, regularized solves.

Dense tensors are plain ``numpy.ndarray`` objects (complex128 unless a real
fast path is explicitly requested). All routines use the row-major layout that
numpy provides by default.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import ContractError, ValidationError

__all__ = [
    "contract",
    "svd_truncate",
    "truncation_rank",
    "eigh_small",
    "solve_regularized",
    "check_finite",
]


def check_finite(*arrays: np.ndarray, name: str = "input") -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValidationError(f"{name} contains NaN or Inf")


def contract(a: np.ndarray, b: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Contract ``a`` and ``b`` over the listed axis pairs.

    The result carries the free axes of ``a`` (in order) followed by the free
    axes of ``b``. The contraction is done by permuting both operands into
    matrices and calling a single matrix product.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    pairs = [(int(i), int(j)) for i, j in pairs]
    for i, j in pairs:
        if not (-a.ndim <= i < a.ndim and -b.ndim <= j < b.ndim):
            raise ContractError(f"axis pair {(i, j)} out of range for shapes {a.shape}, {b.shape}")
    axes_a = [i % a.ndim for i, _ in pairs]
    axes_b = [j % b.ndim for _, j in pairs]
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise ContractError(f"axis repeated in contraction pairs {pairs}")
    for (i, j), ia, jb in zip(pairs, axes_a, axes_b):
        if a.shape[ia] != b.shape[jb]:
            raise ContractError(
                f"axis pair {(i, j)} has mismatched extents {a.shape[ia]} != {b.shape[jb]}"
            )
    free_a = [k for k in range(a.ndim) if k not in axes_a]
    free_b = [k for k in range(b.ndim) if k not in axes_b]
    inner = int(np.prod([a.shape[k] for k in axes_a], dtype=np.int64))
    left = [a.shape[k] for k in free_a]
    right = [b.shape[k] for k in free_b]
    am = a.transpose(free_a + axes_a).reshape(int(np.prod(left, dtype=np.int64)), inner)
    bm = b.transpose(axes_b + free_b).reshape(inner, int(np.prod(right, dtype=np.int64)))
    return (am @ bm).reshape(left + right)


def truncation_rank(s: np.ndarray, max_rank: int | None, cutoff: float) -> tuple[int, float]:
    """Number of singular values to keep and the relative discarded weight.

    Smallest values are dropped while the cumulative discarded squared weight,
    relative to the total squared weight, stays at or below ``cutoff``.
    """
    w = np.abs(s) ** 2
    total = float(w.sum())
    n = len(s)
    if total == 0.0:
        return min(n, 1), 0.0
    tail = np.cumsum(w[::-1])[::-1] / total  # tail[k] = weight of s[k:]
    keep = n
    while keep > 1 and tail[keep - 1] <= cutoff:
        keep -= 1
    if max_rank is not None:
        keep = min(keep, max_rank)
    keep = max(keep, 1)
    discarded = float(tail[keep]) if keep < n else 0.0
    return keep, discarded


def _svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        return sla.svd(m, full_matrices=False, lapack_driver="gesvd")


def svd_truncate(
    t: np.ndarray,
    split: int | Sequence[int],
    max_rank: int | None = None,
    cutoff: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Truncated SVD of a tensor across an axis bipartition.

    Args:
        t: Input tensor.
        split: Either the number of leading axes forming the row group, or an
            explicit sequence of row axes (remaining axes form the column group,
            in their original order).
        max_rank: Upper bound on the kept rank; ``None`` means unbounded.
        cutoff: Relative squared-weight budget for discarded singular values.

    Returns:
        ``(U, S, V, discarded_weight)`` with ``U`` of shape ``row_shape + (r,)``
        and ``V`` of shape ``(r,) + col_shape``.
    """
    if max_rank is not None and max_rank < 1:
        raise ValueError(f"max_rank must be >= 1, got {max_rank}")
    if cutoff < 0:
        raise ValueError(f"cutoff must be nonnegative, got {cutoff}")
    t = np.asarray(t)
    if isinstance(split, (int, np.integer)):
        rows = list(range(int(split)))
    else:
        rows = [int(k) % t.ndim for k in split]
    cols = [k for k in range(t.ndim) if k not in rows]
    if not rows or not cols:
        raise ValueError("split must partition the axes into two nonempty groups")
    row_shape = tuple(t.shape[k] for k in rows)
    col_shape = tuple(t.shape[k] for k in cols)
    m = t.transpose(rows + cols).reshape(int(np.prod(row_shape)), int(np.prod(col_shape)))
    u, s, vh = _svd(m)
    order = np.argsort(-s, kind="stable")
    u, s, vh = u[:, order], s[order], vh[order, :]
    keep, discarded = truncation_rank(s, max_rank, cutoff)
    u = u[:, :keep].reshape(row_shape + (keep,))
    vh = vh[:keep, :].reshape((keep,) + col_shape)
    return u, s[:keep], vh, discarded


def eigh_small(h: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a dense Hermitian matrix, eigenvalues ascending."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {h.shape}")
    check_finite(h, name="matrix")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if h.size and np.max(np.abs(h - h.conj().T)) > tol * scale:
        raise ValidationError("matrix is not Hermitian within tolerance")
    return np.linalg.eigh(0.5 * (h + h.conj().T))


def solve_regularized(
    a: np.ndarray, b: np.ndarray, eta: float = 0.0, hermitian: bool = False
) -> np.ndarray:
    """Solve ``(a + eta * 1) x = b``.

    Falls back to the minimum-norm least-squares solution when the shifted
    matrix is singular to working precision. For ``eta > 0`` an
    ill-conditioning warning from the factorization is accepted.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValidationError(f"right-hand side of length {b.shape[0]} for matrix {a.shape}")
    check_finite(a, b, name="linear system")
    if eta < 0 or not np.isfinite(eta):
        raise ValidationError(f"eta must be finite and nonnegative, got {eta}")
    m = a + eta * np.eye(a.shape[0], dtype=a.dtype) if eta else a
    kinds = ("pos", "her") if hermitian else ("gen",)
    with warnings.catch_warnings():
        # a positive shift makes the system well posed even when badly conditioned;
        # without one, a near-singular factorization is not trusted
        warnings.simplefilter("ignore" if eta > 0 else "error", sla.LinAlgWarning)
        for kind in kinds:
            try:
                return sla.solve(m, b, assume_a=kind, check_finite=False)
            except (np.linalg.LinAlgError, sla.LinAlgWarning, ValueError):
                continue
    return sla.lstsq(m, b, check_finite=False)[0]
