from __future__ import annotations

import sys

import numpy as np
import pytest

from cdcircuits.operators import IsingParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_ising(rng, n: int) -> IsingParams:
    """Generic nearest-neighbour Ising chain with O(1) couplings."""
    return IsingParams(tuple(rng.uniform(-1, 1, n - 1)), tuple(rng.uniform(-1, 1, n)), tuple(rng.uniform(-1, 1, n)))


def random_state(rng, n: int) -> np.ndarray:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
