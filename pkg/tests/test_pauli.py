from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdcircuits.errors import ResourceError
from cdcircuits.pauli import PauliSum, commutator, ising_pauli_sum, nested_commutator, pauli_mul
from cdcircuits.problems import nc_comparison_hamiltonian


def P(terms, n=None):
    return PauliSum.from_terms(terms, n)


def _random_sum(r, n, k):
    letters = "IXYZ"
    terms = [("".join(r.choice(list(letters), n)), complex(r.normal(), r.normal())) for _ in range(k)]
    return P(terms, n)


random_sums = st.builds(
    lambda seed, n, k: _random_sum(np.random.default_rng(seed), n, k),
    st.integers(0, 2**31 - 1),
    st.integers(1, 4),
    st.integers(0, 6),
)


def test_single_site_products():
    assert pauli_mul(P({"X": 1}), P({"X": 1})).allclose(P({"I": 1}))
    assert pauli_mul(P({"X": 1}), P({"Y": 1})).allclose(P({"Z": 1j}))
    assert pauli_mul(P({"ZZ": 1}), P({"XI": 1})).allclose(P({"YZ": 1j}))


def test_commutator_examples():
    assert commutator(P({"Z": 1}), P({"X": 1})).allclose(P({"Y": 2j}))
    h = P({"ZZ": 1.0, "XI": 0.3})
    assert len(commutator(h, h)) == 0
    got = commutator(P({"ZZ": 1}), P({"XI": 1, "IX": 1}))
    assert got.allclose(P({"YZ": 2j, "ZY": 2j}))


def test_nested_commutator_base_and_zero():
    h, dh = P({"ZZ": 1.0, "XI": 0.5}), P({"XI": 1.0, "IZ": 1.0})
    assert nested_commutator(h, dh, 1).allclose(commutator(h, dh))
    for d in (1, 3):
        assert len(nested_commutator(h, PauliSum.zero(2), d)) == 0
    with pytest.raises(ValueError):
        nested_commutator(h, dh, 0)


def test_nested_commutator_matches_sequential_calls():
    p = nc_comparison_hamiltonian(4)
    h, dh = p.pauli(1.0), p.dh_pauli()
    seq = commutator(h, commutator(h, commutator(h, dh)))
    assert nested_commutator(h, dh, 3).allclose(seq)


def test_term_cap():
    p = nc_comparison_hamiltonian(8)
    with pytest.raises(ResourceError):
        nested_commutator(p.pauli(1.0), p.dh_pauli(), 6, term_cap=50)


@settings(max_examples=40, deadline=None)
@given(random_sums, st.integers(0, 2**31 - 1))
def test_commutator_antisymmetric(a, seed):
    b = _random_sum(np.random.default_rng(seed), a.nsites, 5)
    assert commutator(a, b).allclose(-commutator(b, a))


@settings(max_examples=40, deadline=None)
@given(random_sums, st.integers(0, 2**31 - 1))
def test_product_matches_dense(a, seed):
    b = _random_sum(np.random.default_rng(seed), a.nsites, 4)
    assert np.allclose(pauli_mul(a, b).to_dense(), a.to_dense() @ b.to_dense(), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 4))
def test_jacobi_identity(seed, n):
    r = np.random.default_rng(seed)
    a, b, c = (_random_sum(r, n, 4) for _ in range(3))
    tot = commutator(a, commutator(b, c)) + commutator(b, commutator(c, a)) + commutator(c, commutator(a, b))
    assert tot.max_abs() <= 1e-12 * max(1.0, a.max_abs() * b.max_abs() * c.max_abs() * 64)


def test_site_zero_is_most_significant():
    m = P({"ZI": 1.0}).to_dense()
    assert np.allclose(np.diag(m), [1, 1, -1, -1])


def test_inner_and_norm_are_normalized_traces(rng):
    a, b = _random_sum(rng, 3, 5), _random_sum(rng, 3, 5)
    ref = np.trace(a.to_dense().conj().T @ b.to_dense()) / 8
    assert a.inner(b) == pytest.approx(ref)
    assert a.norm2() == pytest.approx(np.real(a.inner(a)))


def test_text_roundtrip(rng):
    a = _random_sum(rng, 4, 7)
    assert PauliSum.from_text(a.to_text(), 4).allclose(a, atol=0)


def test_ising_pauli_sum_layout():
    s = ising_pauli_sum([1.0], [0.5, 0.0], [0.0, 0.25])
    assert s.terms == {"ZZ": 1.0, "XI": 0.5, "IZ": 0.25}
    with pytest.raises(ValueError):
        ising_pauli_sum([1.0, 1.0], [0.0, 0.0], [0.0, 0.0])


def test_invalid_letters_and_lengths():
    with pytest.raises(ValueError):
        P({"XQ": 1.0})
    with pytest.raises(ValueError):
        P([("XX", 1.0), ("X", 1.0)])
