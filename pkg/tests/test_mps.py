from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdcircuits.mps import (
    MPO,
    MPS,
    entanglement_entropy,
    expval,
    inner,
    load_tensor_train,
    mpo_add,
    mpo_apply,
    mpo_apply_dense,
    mpo_mpo_mul,
    mpo_trace_product,
    schmidt_values,
    save_tensor_train,
)
from cdcircuits.operators import mpo_from_pauli_sum
from cdcircuits.pauli import PauliSum, commutator

from conftest import random_state


def test_from_dense_roundtrip(rng):
    v = random_state(rng, 5)
    s = MPS.from_dense(v, 5)
    assert np.allclose(s.to_dense(), v)
    assert s.is_canonical()


def test_canonical_state_has_unit_inner(rng):
    s = MPS.random(6, 4, rng)
    s.canonicalize(2)
    assert inner(s, s) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 4))
def test_canonicalization_preserves_inner_products(seed, center):
    r = np.random.default_rng(seed)
    a, b = MPS.random(5, 3, r, normalize=False), MPS.random(5, 3, r, normalize=False)
    before = abs(inner(a, b))
    a.canonicalize(center)
    b.move_center(4 - center) if b.center is not None else b.canonicalize(4 - center)
    assert abs(inner(a, b)) == pytest.approx(before, rel=1e-12)


def test_identity_mpo_leaves_state(rng):
    s = MPS.random(5, 4, rng)
    out = mpo_apply(MPO.identity(5), s, cutoff=0.0)
    assert abs(inner(s, out)) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_sum_x_on_zero_state():
    sx = mpo_from_pauli_sum(PauliSum.from_terms({"XI": 1.0, "IX": 1.0}))
    out = mpo_apply(sx, MPS.computational("00"), cutoff=0.0).to_dense()
    assert np.allclose(out, [0, 1, 1, 0])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_mpo_apply_exact_vs_dense(seed):
    r = np.random.default_rng(seed)
    w, s = MPO.random(6, 3, r), MPS.random(6, 4, r)
    got = mpo_apply(w, s, cutoff=0.0).to_dense()
    ref = w.to_dense() @ s.to_dense()
    assert np.linalg.norm(got - ref) <= 1e-11 * np.linalg.norm(ref)
    assert np.allclose(mpo_apply_dense(w, s.to_dense()), ref, atol=1e-11 * np.linalg.norm(ref))


def test_mpo_algebra(rng):
    a = MPO.random(4, 3, rng)
    assert np.allclose(mpo_mpo_mul(a, MPO.identity(4), cutoff=0.0).to_dense(), a.to_dense())
    assert mpo_add(a, a.scale(-1.0)).frobenius_norm() <= 1e-12 * max(1.0, a.frobenius_norm())


def test_commutator_routes_agree(rng):
    terms_a = {"ZZIII": 1.0, "IXIII": 0.4, "IIIZZ": -0.7}
    terms_b = {"XIIII": 0.3, "IIZII": 1.2, "IIIYX": 0.5}
    pa, pb = PauliSum.from_terms(terms_a), PauliSum.from_terms(terms_b)
    ma, mb = mpo_from_pauli_sum(pa), mpo_from_pauli_sum(pb)
    via_mpo = mpo_add(mpo_mpo_mul(ma, mb, cutoff=0.0), mpo_mpo_mul(mb, ma, cutoff=0.0).scale(-1.0))
    via_pauli = mpo_from_pauli_sum(commutator(pa, pb))
    assert (via_mpo - via_pauli).frobenius_norm() <= 1e-10 * via_pauli.frobenius_norm()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_compression_never_grows_bonds(seed, cap):
    r = np.random.default_rng(seed)
    s = MPS.random(6, 8, r)
    before = s.max_bond()
    disc = s.compress(max_bond=cap, cutoff=1e-10)
    assert s.max_bond() <= min(before, cap)
    assert all(w >= 0 for w in disc)


def test_traces():
    n = 3
    assert mpo_trace_product([MPO.identity(n)]) == pytest.approx(8)
    z1 = mpo_from_pauli_sum(PauliSum.single(n, {0: "Z"}))
    x1 = mpo_from_pauli_sum(PauliSum.single(n, {0: "X"}))
    assert mpo_trace_product([z1, z1]) == pytest.approx(2**n)
    assert abs(mpo_trace_product([z1, x1])) < 1e-14


def test_expval_matches_dense(rng):
    w, s = MPO.random(4, 2, rng), MPS.random(4, 3, rng)
    v = s.to_dense()
    assert expval(s, w) == pytest.approx(np.vdot(v, w.to_dense() @ v))


def test_entropy_cases(rng):
    assert entanglement_entropy(MPS.computational("0101"), 1) == 0.0
    bell = MPS.from_dense(np.array([1, 0, 0, 1]) / np.sqrt(2), 2)
    assert entanglement_entropy(bell, 0) == pytest.approx(np.log(2))
    v = random_state(rng, 6)
    s = MPS.from_dense(v, 6)
    for bond in range(5):
        m = v.reshape(2 ** (bond + 1), -1)
        p = np.linalg.eigvalsh(m @ m.conj().T)
        p = p[p > 1e-300]
        assert entanglement_entropy(s, bond) == pytest.approx(-(p * np.log(p)).sum(), abs=1e-10)
    assert np.sum(schmidt_values(s, 2) ** 2) == pytest.approx(1.0)


def test_frobenius_norm_and_hermitian_part(rng):
    a = MPO.random(4, 3, rng)
    assert a.frobenius_norm() == pytest.approx(np.linalg.norm(a.to_dense()))
    h = a.hermitian_part()
    assert h.hermitian_defect() < 1e-12
    assert np.allclose(h.to_dense(), 0.5 * (a.to_dense() + a.to_dense().conj().T))


def test_serialization_roundtrip(tmp_path, rng):
    s = MPS.random(4, 3, rng)
    save_tensor_train(s, tmp_path / "state")
    back = load_tensor_train(tmp_path / "state")
    assert isinstance(back, MPS) and np.allclose(back.to_dense(), s.to_dense())
    w = MPO.random(3, 2, rng)
    save_tensor_train(w, tmp_path / "op")
    assert np.allclose(load_tensor_train(tmp_path / "op").to_dense(), w.to_dense())


def test_bad_shapes_rejected():
    with pytest.raises(ValueError):
        MPS([np.zeros((2, 2, 1))])
    with pytest.raises(ValueError):
        MPS([np.zeros((1, 2, 2)), np.zeros((3, 2, 1))])
    with pytest.raises(ValueError):
        inner(MPS.computational("0"), MPS.computational("00"))
