"""Adiabatic schedules: paths lambda(t), slicing and chunking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Schedule", "PATHS"]

PATHS = ("sin2", "nested-sin2", "linear")


@dataclass(frozen=True)
class Schedule:
    """Adiabatic protocol over total time ``T`` with ``S`` slices per unit time.

    The number of slices is ``round(S * T)`` (at least one) and the slice
    length is ``T / n_slices``. Slices are split into ``M`` consecutive chunks
    of (nearly) equal size.
    """

    T: float
    S: float
    path: str = "sin2"
    M: int = 1

    def __post_init__(self) -> None:
        if self.T <= 0 or self.S <= 0:
            raise ValueError("T and S must be positive")
        if self.path not in PATHS:
            raise ValueError(f"unknown path {self.path!r}; choose from {PATHS}")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.M > self.n_slices:
            raise ValueError(f"M={self.M} chunks but only {self.n_slices} slices")

    @property
    def n_slices(self) -> int:
        return max(1, int(round(self.S * self.T)))

    @property
    def tau(self) -> float:
        return self.T / self.n_slices

    def lam(self, t: float | np.ndarray) -> float | np.ndarray:
        x = np.asarray(t, dtype=float) / self.T
        if self.path == "linear":
            out = x
        elif self.path == "sin2":
            out = np.sin(0.5 * np.pi * x) ** 2
        else:
            out = np.sin(0.5 * np.pi * np.sin(0.5 * np.pi * x) ** 2) ** 2
        return float(out) if np.ndim(out) == 0 else out

    def lam_dot(self, t: float | np.ndarray) -> float | np.ndarray:
        x = np.asarray(t, dtype=float) / self.T
        if self.path == "linear":
            out = np.full_like(x, 1.0 / self.T)
        elif self.path == "sin2":
            out = (0.5 * np.pi / self.T) * np.sin(np.pi * x)
        else:
            inner = 0.5 * np.pi * np.sin(0.5 * np.pi * x) ** 2
            d_inner = 0.5 * np.pi * (0.5 * np.pi / self.T) * np.sin(np.pi * x)
            out = np.sin(2 * inner) * d_inner
        return float(out) if np.ndim(out) == 0 else out

    def slice_midpoints(self) -> list[tuple[float, float, float]]:
        """``(t_s, lambda(t_s), lambda_dot(t_s))`` at every slice midpoint."""
        tau = self.tau
        return [((s + 0.5) * tau, self.lam((s + 0.5) * tau), self.lam_dot((s + 0.5) * tau)) for s in range(self.n_slices)]

    def slice_ends(self) -> list[tuple[float, float]]:
        """``(t, lambda(t))`` at the end of every slice."""
        tau = self.tau
        return [((s + 1) * tau, self.lam((s + 1) * tau)) for s in range(self.n_slices)]

    def chunks(self) -> list[range]:
        """Slice indices belonging to each chunk."""
        parts = np.array_split(np.arange(self.n_slices), self.M)
        return [range(int(p[0]), int(p[-1]) + 1) for p in parts]

    def chunk_of(self, s: int) -> int:
        for m, r in enumerate(self.chunks()):
            if s in r:
                return m
        raise IndexError(s)
