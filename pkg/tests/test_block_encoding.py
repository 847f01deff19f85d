import numpy as np
import pytest

import oracles as O
from ntca.block_encoding import (
    BlockEncoding, Kind, amplitude_spectrum, build_G, build_Gtilde, build_W, eigenstate_for_k, extract_block,
    invariant_pair, multiset_contains,
)
from ntca.errors import CircuitError, DenseCapError
from ntca.oracle import random_vector, synthesize_state_prep
from ntca.statevector import Circuit, dense_unitary


def oracle(c):
    return synthesize_state_prep(np.asarray(c, dtype=complex))


@pytest.mark.parametrize("imag", [False, True])
@pytest.mark.parametrize("N", [2, 4, 8])
def test_W_prepares_eigenstate(N, imag):
    c = random_vector(N, np.random.default_rng(N + 10 * imag))
    U = oracle(c.entries)
    for k in range(1, N + 1):
        got = eigenstate_for_k(U, k, Kind.IMAG_PART if imag else Kind.REAL_PART).amplitudes
        assert np.abs(got - O.eigenstate(c.entries, k, imag)).max() < 1e-12


def test_W_diagonal_overlap():
    c = random_vector(4, np.random.default_rng(2)).entries
    W = dense_unitary(build_W(oracle(c)))
    n = 2
    for k in range(4):
        col = (k << (n + 1))
        row = (k << (n + 1)) | (k << 1)
        assert np.isclose(W[row, col], (1 + c[k]) / 2)


def test_W_basis_input_collapses():
    v = eigenstate_for_k(oracle([1, 0]), 1).amplitudes
    # |k=0>|da=0>|B=0>: both c and e_1 agree so the B=1 branch cancels
    assert np.allclose(v, np.eye(8)[0])


def test_G_basis_eigenvalues():
    G = dense_unitary(build_G(oracle([1, 0])))
    v0, v1 = invariant_pair(np.array([1, 0]), 2)
    # k=2 has x=0: eigenvalues +-i on the invariant pair
    for sign in (1, -1):
        v = (v0 + sign * 1j * v1) / np.sqrt(2)
        lam = np.vdot(v, G @ v)
        assert np.linalg.norm(G @ v - lam * v) < 1e-9
        assert np.isclose(abs(lam.imag), 1) and abs(lam.real) < 1e-9
    w = O.eigenstate([1, 0], 1)
    assert np.allclose(G @ w, -w)


@pytest.mark.parametrize("N", [2, 4])
def test_G_eigenvectors_from_invariant_pair(N):
    c = random_vector(N, np.random.default_rng(40 + N)).entries
    G = dense_unitary(build_G(oracle(c)))
    for k in range(1, N + 1):
        v0, v1 = invariant_pair(c, k)
        for sign in (1, -1):
            v = (v0 + sign * 1j * v1) / np.sqrt(2)
            lam = np.vdot(v, G @ v)
            assert np.linalg.norm(G @ v - lam * v) < 1e-9
            assert min(abs(lam - e) for e in O.reflection_eigenvalues([c[k - 1].real])) < 1e-9


def test_Gtilde_four_queries_and_spectrum_of_basis_input():
    be = build_Gtilde(oracle([1, 0]))
    assert be.circuit.queries == {"U": 2, "U^dag": 2}
    eig = np.linalg.eigvalsh(extract_block(be))
    assert multiset_contains(eig, [1, 0])


def test_Gtilde_imag_basis_input():
    be = build_Gtilde(oracle([1j, 0]), Kind.IMAG_PART)
    A = extract_block(be)
    assert np.abs(A - A.conj().T).max() < 1e-10
    assert multiset_contains(np.linalg.eigvalsh(A), [1, 0])


@pytest.mark.parametrize("seed", range(3))
def test_Gtilde_random_spectrum(seed):
    c = random_vector(4, np.random.default_rng(seed))
    U = oracle(c.entries)
    assert amplitude_spectrum(U).contains(c.x)
    assert amplitude_spectrum(U, Kind.IMAG_PART).contains(c.y)


def test_eigenstates_of_block():
    c = random_vector(4, np.random.default_rng(9)).entries
    A = extract_block(build_Gtilde(oracle(c)))
    vs = []
    for k in range(1, 5):
        v = O.eigenstate(c, k)
        assert np.linalg.norm(A @ v - c[k - 1].real * v) < 1e-9
        vs.append(v)
    uniform = sum(vs) / 2
    assert np.isclose(np.linalg.norm(uniform), 1)


def test_identity_block():
    be = BlockEncoding(Circuit(2), 1.0, 1)
    assert np.allclose(extract_block(be), np.eye(2))


def test_block_dense_cap():
    with pytest.raises(DenseCapError):
        extract_block(build_Gtilde(oracle(random_vector(8, np.random.default_rng(0)).entries)), cap=5)


def test_eigenstate_index_range():
    with pytest.raises(CircuitError):
        eigenstate_for_k(oracle([1, 0]), 3)


def test_multiset_contains_counts_multiplicity():
    assert multiset_contains([0.1, 0.1, 0.5], [0.1, 0.1])
    assert not multiset_contains([0.1, 0.5], [0.1, 0.1])


def test_block_encoding_json_round_trip():
    be = build_Gtilde(oracle([0.6, 0.8]))
    back = BlockEncoding.from_json(be.to_json())
    assert np.allclose(extract_block(back), extract_block(be))
