from __future__ import annotations

import csv

import numpy as np
import pytest

from cdcircuits.agp import (
    AGPSolverConfig,
    fit_nc_coefficients,
    liouvillian,
    nc_to_mpo,
    normalized_cost,
    normalized_error,
    solve_variational_agp,
    write_sweep_csv,
)
from cdcircuits.errors import UndefinedMetricError, ValidationError
from cdcircuits.mps import MPO
from cdcircuits.operators import IsingParams, ising_hamiltonian, mpo_from_pauli_sum
from cdcircuits.oracle import exact_agp, ising_dense, nc_dense
from cdcircuits.pauli import PauliSum
from cdcircuits.problems import gap_traversal, nc_comparison_hamiltonian

from conftest import random_ising

_Y = np.array([[0, -1j], [1j, 0]])


def _qubit():
    """``(1 - lam) X + lam Z`` at ``lam = 0.5`` and its derivative ``Z - X``."""
    return IsingParams((), (0.5,), (0.5,)), IsingParams((), (-1.0,), (1.0,))


def _dense_cost(a, h, dh):
    g = dh + 1j * (a @ h - h @ a)
    return np.linalg.norm(g) ** 2 / np.linalg.norm(dh) ** 2


def _dense_error(a, h, dh):
    g = dh + 1j * (a @ h - h @ a)
    return np.linalg.norm(g @ h - h @ g) ** 2 / np.linalg.norm(dh) ** 2


def test_config_validation():
    with pytest.raises(ValueError):
        AGPSolverConfig(chi=0)
    with pytest.raises(ValueError):
        AGPSolverConfig(eta=-1.0)
    with pytest.raises(ValueError):
        AGPSolverConfig(eta=float("nan"))
    with pytest.raises(ValueError):
        AGPSolverConfig(init="bogus")


def test_liouvillian_matches_dense(rng):
    p = random_ising(rng, 3)
    h = ising_dense(p)
    lv = liouvillian(ising_hamiltonian(p)).to_dense()
    x = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    # per-site vectorization index is out * 2 + in; reorder to row-major (out..., in...)
    xv = x.reshape(2, 2, 2, 2, 2, 2).transpose(0, 3, 1, 4, 2, 5).reshape(-1)
    got = (lv @ xv).reshape(2, 2, 2, 2, 2, 2).transpose(0, 2, 4, 1, 3, 5).reshape(8, 8)
    assert np.allclose(got, h @ x - x @ h, atol=1e-12)


def test_single_qubit_variational_is_minus_y():
    p, dp = _qubit()
    sol = solve_variational_agp(ising_hamiltonian(p), ising_hamiltonian(dp), AGPSolverConfig(chi=1, eta=1e-12))
    a = sol.a_tilde.to_dense()
    assert np.trace(a @ _Y).real / 2 == pytest.approx(-1.0, abs=1e-6)
    assert np.allclose(a, -_Y, atol=1e-6)
    assert sol.normalized_cost < 1e-10


def test_single_qubit_exact_is_minus_y():
    p, dp = _qubit()
    a = exact_agp(ising_dense(p), ising_dense(dp))
    assert np.allclose(a, -_Y, atol=1e-12)


def test_zero_derivative_gives_zero_solution():
    h = ising_hamiltonian(IsingParams.uniform(3, 1.0, 0.5, 0.2))
    sol = solve_variational_agp(h, MPO.zero(3))
    assert sol.undefined_metric
    assert sol.normalized_cost == 0.0 and sol.normalized_error == 0.0
    assert np.allclose(sol.a_tilde.to_dense(), 0.0)


def test_metrics_undefined_for_zero_derivative():
    h = ising_hamiltonian(IsingParams.uniform(3, 1.0, 0.5, 0.2))
    with pytest.raises(UndefinedMetricError):
        normalized_cost(MPO.zero(3), h, MPO.zero(3))
    with pytest.raises(UndefinedMetricError):
        normalized_error(MPO.zero(3), h, MPO.zero(3))


def test_zero_ansatz_has_unit_cost(rng):
    p, q = random_ising(rng, 4), random_ising(rng, 4)
    assert normalized_cost(MPO.zero(4), ising_hamiltonian(p), ising_hamiltonian(q)) == pytest.approx(1.0, abs=1e-12)


def test_metrics_match_dense_for_random_operator(rng):
    p, q = random_ising(rng, 4), random_ising(rng, 4)
    a = MPO.random(4, 3, rng)
    h, dh = ising_dense(p), ising_dense(q)
    hm, dm = ising_hamiltonian(p), ising_hamiltonian(q)
    assert normalized_cost(a, hm, dm) == pytest.approx(_dense_cost(a.to_dense(), h, dh), rel=1e-10)
    assert normalized_error(a, hm, dm) == pytest.approx(_dense_error(a.to_dense(), h, dh), rel=1e-10)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_exact_agp_has_vanishing_error(rng, n):
    p, q = random_ising(rng, n), random_ising(rng, n)
    a = exact_agp(ising_dense(p), ising_dense(q))
    err = normalized_error(MPO.from_dense(a, n), ising_hamiltonian(p), ising_hamiltonian(q))
    assert err <= 1e-10


def test_objective_monotone_and_sizes(rng):
    prob = gap_traversal(6, gstar=0.48)
    sol = solve_variational_agp(prob.hamiltonian(0.5), prob.dh(), AGPSolverConfig(chi=4, eta=1e-6, sweeps=4))
    obj = np.array(sol.objective)
    assert np.all(np.diff(obj) <= 1e-10 * np.maximum(1.0, np.abs(obj[:-1])))
    assert sol.a_tilde.max_bond() <= 4
    assert sol.normalized_cost >= 0 and sol.normalized_error >= 0
    assert 0.0 <= sol.hermitian_defect < 1e-3


def test_cost_nonincreasing_in_chi():
    prob = nc_comparison_hamiltonian(6)
    h, dh = prob.hamiltonian(1.0), prob.dh()
    costs = []
    prev = None
    for chi in (1, 2, 4, 8):
        cfg = AGPSolverConfig(chi=chi, eta=1e-8, sweeps=10)
        if prev is not None:
            cfg = AGPSolverConfig(chi=chi, eta=1e-8, sweeps=10, init="previous-solution")
        sol = solve_variational_agp(h, dh, cfg, initial=prev)
        costs.append(sol.normalized_cost)
        prev = sol.a_tilde
    assert all(b <= a + 1e-10 for a, b in zip(costs, costs[1:]))


def test_variational_approaches_exact_at_full_bond():
    prob = gap_traversal(4, gstar=0.48)
    lam = 0.4
    sol = solve_variational_agp(prob.hamiltonian(lam), prob.dh(), AGPSolverConfig(chi=16, eta=1e-12, sweeps=20))
    assert sol.normalized_error < 1e-8


def test_conjugate_gradient_local_solver_matches_dense():
    prob = gap_traversal(6, gstar=0.48)
    h, dh = prob.hamiltonian(0.5), prob.dh()
    dense = solve_variational_agp(h, dh, AGPSolverConfig(chi=4, eta=1e-6, sweeps=3))
    cg = solve_variational_agp(h, dh, AGPSolverConfig(chi=4, eta=1e-6, sweeps=3, dense_local_max=1))
    assert cg.normalized_cost == pytest.approx(dense.normalized_cost, rel=1e-6)


def test_complex_hamiltonian_path(rng):
    # an XY-coupled term makes the Hamiltonian complex, bypassing the real fast path
    p = random_ising(rng, 3)
    extra = PauliSum.from_terms({"XYI": 0.3, "IXY": -0.2})
    hp = p.to_pauli() + extra + extra.dagger()
    h = mpo_from_pauli_sum(hp)
    dh = ising_hamiltonian(random_ising(rng, 3))
    sol = solve_variational_agp(h, dh, AGPSolverConfig(chi=16, eta=1e-12, sweeps=20))
    a = exact_agp(hp.to_dense(), dh.to_dense())
    assert sol.normalized_error == pytest.approx(normalized_error(MPO.from_dense(a, 3), h, dh), abs=1e-8)


def test_non_hermitian_hamiltonian_rejected(rng):
    with pytest.raises(ValidationError):
        solve_variational_agp(MPO.random(3, 2, rng), ising_hamiltonian(random_ising(rng, 3)))


def test_size_mismatch_rejected(rng):
    with pytest.raises(ValidationError):
        solve_variational_agp(ising_hamiltonian(random_ising(rng, 3)), ising_hamiltonian(random_ising(rng, 4)))


def test_sweep_csv_header(tmp_path):
    path = tmp_path / "sweep.csv"
    write_sweep_csv([{"chi": 2, "eta": 1e-6, "cost": 0.5, "error": 0.1, "hermitian_defect": 0.0}], path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["chi", "eta", "cost", "error", "hermitian_defect"]
    assert float(rows[1][3]) == 0.1


# nested commutators ---------------------------------------------------------


def test_nc_single_qubit_order_one_is_exact():
    p, dp = _qubit()
    nc = fit_nc_coefficients(p.to_pauli(), dp.to_pauli(), 1)
    assert np.allclose(nc.operator().to_dense(), -_Y, atol=1e-12)
    assert nc.normalized_cost == pytest.approx(0.0, abs=1e-12)


def test_nc_single_qubit_metrics_match_dense():
    p, dp = _qubit()
    for order in (1, 2):
        nc = fit_nc_coefficients(p.to_pauli(), dp.to_pauli(), order, alphas=np.full(order, 0.1))
        a = nc.operator().to_dense()
        h, dh = ising_dense(p), ising_dense(dp)
        assert nc.normalized_cost == pytest.approx(_dense_cost(a, h, dh), rel=1e-12)
        assert nc.normalized_error == pytest.approx(_dense_error(a, h, dh), rel=1e-12)


def test_nc_commuting_case_is_zero():
    h = PauliSum.from_terms({"ZZI": 1.0, "IZZ": 1.0})
    dh = PauliSum.from_terms({"ZII": 1.0, "IIZ": -0.5})
    nc = fit_nc_coefficients(h, dh, 2)
    assert np.all(nc.alphas == 0.0)
    assert nc.singular
    assert nc.normalized_cost == pytest.approx(1.0)
    a, bond = nc_to_mpo(nc)
    assert bond == 1 and np.allclose(a.to_dense(), 0.0)


def test_nc_order_must_be_positive():
    p, dp = _qubit()
    with pytest.raises(ValueError):
        fit_nc_coefficients(p.to_pauli(), dp.to_pauli(), 0)


def test_nc_fit_beats_perturbed_alphas(rng):
    p, q = random_ising(rng, 5), random_ising(rng, 5)
    nc = fit_nc_coefficients(p.to_pauli(), q.to_pauli(), 3)
    for _ in range(5):
        trial = nc.alphas * (1 + 0.05 * rng.normal(size=3))
        other = fit_nc_coefficients(p.to_pauli(), q.to_pauli(), 3, alphas=trial)
        assert nc.normalized_cost <= other.normalized_cost + 1e-12


def test_nc_pauli_and_mpo_gram_routes_agree(rng):
    p, q = random_ising(rng, 5), random_ising(rng, 5)
    a = fit_nc_coefficients(p.to_pauli(), q.to_pauli(), 3, method="pauli")
    b = fit_nc_coefficients(p.to_pauli(), q.to_pauli(), 3, method="mpo")
    assert np.allclose(a.alphas, b.alphas, rtol=1e-8)


def test_nc_matches_dense_oracle(rng):
    p, q = random_ising(rng, 4), random_ising(rng, 4)
    nc = fit_nc_coefficients(p.to_pauli(), q.to_pauli(), 3)
    a, alphas = nc_dense(ising_dense(p), ising_dense(q), 3)
    assert np.allclose(nc.alphas, alphas, rtol=1e-8)
    assert np.allclose(nc.operator().to_dense(), a, atol=1e-10)


def test_exact_agp_beats_every_nc_order(rng):
    for _ in range(3):
        p, q = random_ising(rng, 4), random_ising(rng, 4)
        a = exact_agp(ising_dense(p), ising_dense(q))
        exact_err = _dense_error(a, ising_dense(p), ising_dense(q))
        for order in range(1, 7):
            nc = fit_nc_coefficients(p.to_pauli(), q.to_pauli(), order)
            assert exact_err <= nc.normalized_error + 1e-10


def test_nc_routes_agree_and_order_bonds_at_n6():
    prob = nc_comparison_hamiltonian(6)
    nc = fit_nc_coefficients(prob.pauli(1.0), prob.dh_pauli(), 1)
    a1, b1 = nc_to_mpo(nc, "pauli-strings")
    a2, b2 = nc_to_mpo(nc, "mpo-arithmetic")
    diff = (a1 - a2).frobenius_norm() / a1.frobenius_norm()
    assert diff < 1e-10
    assert b1 <= b2


def test_nc_order_two_at_n8_matches_dense_elements(rng):
    prob = nc_comparison_hamiltonian(8)
    nc = fit_nc_coefficients(prob.pauli(1.0), prob.dh_pauli(), 2)
    a, _ = nc_to_mpo(nc, "mpo-arithmetic")
    ref, _ = nc_dense(ising_dense(prob.params(1.0)), ising_dense(prob.dparams()), 2)
    full = a.to_dense()
    idx = rng.integers(256, size=(100, 2))
    assert np.allclose(full[idx[:, 0], idx[:, 1]], ref[idx[:, 0], idx[:, 1]], atol=1e-10)


def test_nc_to_mpo_unknown_route():
    p, dp = _qubit()
    nc = fit_nc_coefficients(p.to_pauli(), dp.to_pauli(), 1)
    with pytest.raises(ValueError):
        nc_to_mpo(nc, "bogus")
