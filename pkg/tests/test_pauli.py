"""Pauli decomposition and expansion."""

import itertools

import numpy as np
import pytest

from sigma_gap.model import HamiltonianSpec, build_dense_hamiltonian
from sigma_gap.pauli import (
    PauliHamiltonian,
    PauliString,
    pauli_decompose,
    pauli_kron,
    pauli_to_dense,
    site_ops_pauli_lmax_half,
)


def random_hermitian(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (a + a.conj().T)


def test_site_ops():
    ops = site_ops_pauli_lmax_half()
    assert ops["n_z"].toarray()[0, 0] == pytest.approx(1 / 3)
    np.testing.assert_allclose(ops["H0"].toarray(), 0.75 * np.eye(2))
    nplus = ops["n_plus"].toarray()
    nz = np.flatnonzero(np.abs(nplus) > 1e-15)
    assert nz.size == 1
    assert abs(nplus.flat[nz[0]]) == pytest.approx(np.sqrt(2) / 3)


def test_decompose_trivial():
    ph = pauli_decompose(np.eye(4), 2)
    assert ph.as_dict() == {"II": pytest.approx(1.0)}
    ph = pauli_decompose(pauli_kron("ZZ"), 2)
    assert ph.as_dict() == {"ZZ": pytest.approx(1.0)}


def test_single_z_expansion():
    np.testing.assert_array_equal(pauli_to_dense(PauliHamiltonian(1, [PauliString(1, "Z")])).toarray(), np.diag([1, -1]))


def test_pauli_basis_orthogonality():
    for n in (1, 2, 3):
        strings = ["".join(p) for p in itertools.product("IXYZ", repeat=n)]
        mats = [pauli_kron(s) for s in strings]
        for a, ma in enumerate(mats):
            for b, mb in enumerate(mats):
                tr = np.trace(ma @ mb)
                assert tr == pytest.approx(2**n if a == b else 0, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_round_trip_random_hermitian(n):
    rng = np.random.default_rng(n)
    for _ in range(25):
        a = random_hermitian(rng, 2**n)
        ph = pauli_decompose(a, n)
        assert ph.is_hermitian
        assert max(abs(t.coeff.imag) for t in ph.terms) <= 1e-13
        np.testing.assert_allclose(pauli_to_dense(ph).toarray(), a, atol=1e-12)


def test_expansion_matches_kron_oracle():
    rng = np.random.default_rng(7)
    strings = ["".join(rng.choice(list("IXYZ"), 3)) for _ in range(6)]
    coeffs = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    ph = PauliHamiltonian(3, [PauliString(c, s) for c, s in zip(coeffs, strings)])
    ref = sum(t.coeff * pauli_kron(t.letters) for t in ph.terms)
    np.testing.assert_allclose(pauli_to_dense(ph).toarray(), ref, atol=1e-14)


@pytest.mark.parametrize("beta", [0.1, 10.0])
def test_sigma_hamiltonian_terms(beta):
    h = build_dense_hamiltonian(HamiltonianSpec(4, beta))
    ph = pauli_decompose(h, 4)
    terms = ph.as_dict()
    assert len(terms) == 13
    assert terms["IIII"].real == pytest.approx(3 * 4 / (8 * beta), rel=1e-14)
    for a, b in [(0, 1), (1, 2), (2, 3), (3, 0)]:
        for p in "XYZ":
            letters = ["I"] * 4
            letters[a] = letters[b] = p
            assert terms["".join(letters)] == pytest.approx(beta / 9, abs=1e-14)
    np.testing.assert_allclose(pauli_to_dense(ph).toarray(), h.toarray(), atol=1e-12)


@pytest.mark.parametrize("n", [3, 5, 6, 8])
def test_term_count_periodic_chain(n):
    ph = pauli_decompose(build_dense_hamiltonian(HamiltonianSpec(n, 0.5)), n)
    assert len(ph) == 3 * n + 1


def test_text_round_trip():
    ph = pauli_decompose(build_dense_hamiltonian(HamiltonianSpec(4, 0.1)), 4)
    back = PauliHamiltonian.from_text(ph.to_text())
    assert back.as_dict() == ph.as_dict()


def test_invalid_inputs():
    with pytest.raises(ValueError):
        PauliString(1, "XQ")
    with pytest.raises(ValueError):
        PauliHamiltonian(2, [PauliString(1, "XYZ")])
    with pytest.raises(ValueError):
        pauli_decompose(np.eye(3), 2)
    with pytest.raises(ValueError):
        PauliHamiltonian.from_text("1.0 XX\n")


def test_large_expansion_is_sparse():
    ph = PauliHamiltonian(13, [PauliString(1.0, "Z" * 13), PauliString(0.5, "X" + "I" * 12)])
    op = pauli_to_dense(ph)
    assert op.is_sparse
    assert op.matrix.nnz == 2 * 2**13
