from __future__ import annotations

import csv

import numpy as np
import pytest

from cdcircuits.dmrg import DmrgConfig, first_excited, gap_scan, ground_state, write_gap_csv
from cdcircuits.errors import ValidationError
from cdcircuits.mps import MPO, MPS, inner
from cdcircuits.operators import IsingParams, ising_hamiltonian
from cdcircuits.oracle import ising_dense
from cdcircuits.problems import critical_preparation, gap_traversal

from conftest import random_ising


def _dense_spectrum(p: IsingParams) -> np.ndarray:
    return np.linalg.eigvalsh(ising_dense(p))


def test_config_validation():
    with pytest.raises(ValueError):
        DmrgConfig(max_bond=0)
    with pytest.raises(ValueError):
        DmrgConfig(sweeps=0)
    with pytest.raises(ValueError):
        DmrgConfig(penalty_weight=-1.0)


def test_sum_z_ground_state_is_all_ones():
    n = 5
    res = ground_state(ising_hamiltonian(IsingParams.uniform(n, 0.0, 0.0, 1.0)))
    assert res.energy == pytest.approx(-n, abs=1e-10)
    assert abs(inner(MPS.computational("1" * n), res.state)) ** 2 == pytest.approx(1.0, abs=1e-10)


def test_minus_sum_x_ground_state_is_plus_product():
    n = 5
    res = ground_state(ising_hamiltonian(IsingParams.uniform(n, 0.0, -1.0, 0.0)))
    assert res.energy == pytest.approx(-n, abs=1e-10)
    plus = MPS.product_state([np.array([1.0, 1.0]) / np.sqrt(2)] * n)
    assert abs(inner(plus, res.state)) ** 2 == pytest.approx(1.0, abs=1e-10)


def test_result_unpacks_as_pair():
    e, s = ground_state(ising_hamiltonian(IsingParams.uniform(3, 0.0, 0.0, 1.0)))
    assert isinstance(s, MPS)
    assert e == pytest.approx(-3.0)


def test_critical_chain_n10_matches_dense():
    p = critical_preparation(10).params(1.0)
    res = ground_state(ising_hamiltonian(p))
    assert res.energy == pytest.approx(_dense_spectrum(p)[0], abs=1e-9)
    assert res.converged
    assert res.variance < 1e-8


@pytest.mark.parametrize("n", [4, 6, 8, 10])
def test_random_chains_match_dense(rng, n):
    p = random_ising(rng, n)
    res = ground_state(ising_hamiltonian(p))
    assert res.energy == pytest.approx(_dense_spectrum(p)[0], abs=1e-9)


def test_sweep_energies_nonincreasing(rng):
    res = ground_state(ising_hamiltonian(random_ising(rng, 8)), DmrgConfig(init_bond=2))
    e = np.array(res.sweep_energies)
    assert np.all(np.diff(e) <= DmrgConfig().convergence_tol + 1e-12)


def test_sum_z_first_excited_is_single_flip():
    n = 3
    h = ising_hamiltonian(IsingParams.uniform(n, 0.0, 0.0, 1.0))
    gs = ground_state(h)
    ex = first_excited(h, gs.state)
    assert ex.energy == pytest.approx(-n + 2, abs=1e-9)
    assert abs(inner(gs.state, ex.state)) < 1e-6


def test_gt_gap_at_half_matches_dense():
    prob = gap_traversal(8, gstar=0.48)
    p = prob.params(0.5)
    h = ising_hamiltonian(p)
    gs = ground_state(h)
    ex = first_excited(h, gs.state)
    e = _dense_spectrum(p)
    assert ex.energy - gs.energy == pytest.approx(e[1] - e[0], abs=1e-6)
    assert ex.energy >= gs.energy - 1e-10


def test_degenerate_ferromagnet_gap_closes():
    p = IsingParams.uniform(4, 1.0, 0.0, 0.0)
    h = ising_hamiltonian(p)
    gs = ground_state(h)
    ex = first_excited(h, gs.state)
    e = _dense_spectrum(p)
    assert e[1] - e[0] == pytest.approx(0.0, abs=1e-12)
    assert ex.energy - gs.energy == pytest.approx(0.0, abs=1e-8)
    assert abs(inner(gs.state, ex.state)) < 1e-6


def test_first_excited_rejects_unnormalized_ground_state():
    h = ising_hamiltonian(IsingParams.uniform(3, 0.0, 0.0, 1.0))
    gs = ground_state(h).state.scale(2.0)
    with pytest.raises(ValidationError):
        first_excited(h, gs)


def test_non_hermitian_mpo_rejected(rng):
    bad = MPO.random(4, 2, rng)
    with pytest.raises(ValidationError):
        ground_state(bad)


def test_gap_scan_rows_and_csv(tmp_path):
    prob = gap_traversal(7)
    rows = gap_scan(prob.hamiltonian, 5)
    lams = [r["lambda"] for r in rows]
    assert lams == pytest.approx(list(np.linspace(0, 1, 5)))
    assert all(r["gap"] >= -1e-8 for r in rows)
    # lambda = 0 is a free spin in a field g*: gap 2 g*
    assert rows[0]["gap"] == pytest.approx(2 * 0.48, abs=1e-8)
    path = tmp_path / "gap.csv"
    write_gap_csv(rows, path)
    with open(path) as fh:
        got = list(csv.reader(fh))
    assert got[0] == ["lambda", "gap", "e0", "e1", "converged"]
    assert len(got) == 6


def test_gap_scan_needs_two_points():
    with pytest.raises(ValueError):
        gap_scan(gap_traversal(7).hamiltonian, 1)
