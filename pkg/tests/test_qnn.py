import numpy as np
import pytest

import oracles as O
from ntca.errors import ConfigError
from ntca.oracle import random_vector, synthesize_state_prep
from ntca.pipeline import NtcaConfig, postselected_amplitudes, run_ntca
from ntca.poly import ODD, exact, monomial_power, taylor_tanh
from ntca.qnn import (
    LayerSpec, amplification_polynomial, amplitude_estimation, estimate_nodes, multi_layer, qpe_distribution,
    random_orthogonal, single_layer, two_layer,
)
from ntca.statevector import Circuit

SWAP = np.array([[0, 1], [1, 0]])
SQ = monomial_power(2)


@pytest.fixture(scope="module")
def psi4():
    v = np.random.default_rng(0).normal(size=4)
    return v / np.linalg.norm(v)


def test_identity_layer_returns_input():
    c = random_vector(4, np.random.default_rng(1)).entries
    layer = LayerSpec(np.eye(4), monomial_power(1), monomial_power(1).scaled(1j))
    res = single_layer(c, layer)
    assert O.global_phase_fidelity(res.output, c) >= 1 - 1e-9
    assert res.ok


def test_swap_and_square():
    res = single_layer([0.6, 0.8], LayerSpec(SWAP, SQ, real=True))
    assert O.global_phase_fidelity(res.output, [0.64, 0.36]) >= 1 - 1e-10
    assert np.allclose(res.output, [0.64, 0.36], atol=1e-9)


def test_quantum_data_input():
    U = synthesize_state_prep(np.array([0.6, 0.8]))
    res = single_layer(U, LayerSpec(SWAP, SQ, real=True))
    assert np.allclose(res.output, [0.64, 0.36], atol=1e-9)


def test_tanh_layer_matches_classical(psi4):
    V = random_orthogonal(4, np.random.default_rng(2))
    P = exact(taylor_tanh(5))
    res = single_layer(psi4, LayerSpec(V, P, real=True), eps=1e-2)
    want = P(V @ psi4)
    assert np.abs(res.classical - want).max() < 1e-12
    assert res.per_point_error <= 1e-2 / 4


def test_layer_validation():
    with pytest.raises(ConfigError):
        LayerSpec(np.ones((2, 2)), SQ)
    with pytest.raises(ConfigError):
        LayerSpec(np.eye(2) * 1j, SQ, real=True)
    with pytest.raises(ConfigError):
        LayerSpec(np.ones((2, 3)), SQ)
    assert LayerSpec(np.eye(3), SQ).V.shape == (4, 4)


def test_amplification_polynomial_window():
    # gain and tolerance of a width-2 hidden layer at epsilon 1e-2
    gain = 8 * np.sqrt(2)
    amp = amplification_polynomial(gain, 3e-4)
    x = np.linspace(0, amp.interval, 401)
    assert np.abs(amp.poly(x) - gain * x).max() <= 3e-4
    grid = np.linspace(-1, 1, 4001)
    assert np.abs(amp.poly(grid)).max() <= 1
    assert amp.poly.parity == ODD


@pytest.mark.slow
def test_two_layer_squares(psi4):
    rng = np.random.default_rng(3)
    L1 = LayerSpec(random_orthogonal(4, rng), SQ, width=2, real=True)
    L2 = LayerSpec(random_orthogonal(4, rng), SQ, width=2, real=True)
    res = two_layer(psi4, L1, L2)
    want = O.nested(psi4, [(L1.V, lambda z: z.real**2, 2), (L2.V, lambda z: z.real**2, 2)])
    assert np.abs(res.classical - want).max() < 1e-12
    assert res.ok
    # U_psi uses per run: layer-one invocation x amplification degree x final invocation
    assert res.psi_queries_per_run == res.layer_queries[0] * res.amplification_degrees[0] * res.layer_queries[1]


@pytest.mark.slow
def test_identity_second_layer_matches_single(psi4):
    V = random_orthogonal(4, np.random.default_rng(4))
    one = single_layer(psi4, LayerSpec(V, SQ, width=2, real=True))
    two = two_layer(psi4, LayerSpec(V, SQ, width=2, real=True), LayerSpec(np.eye(4), monomial_power(1), width=2))
    assert np.abs(one.output - two.output).max() <= two.error_bound


def test_layer_cap():
    with pytest.raises(ConfigError):
        multi_layer([1, 0], [LayerSpec(np.eye(2), SQ)] * 4)


def test_amplitude_estimation_on_hadamard():
    circ = Circuit(1)
    circ.add("h", 0)
    for mode in ("exact", "statevector", "sampled"):
        est = amplitude_estimation(circ, [0], [1], 0.05, mode)
        assert abs(est.estimate - np.sqrt(0.5)) <= 0.05


def test_amplitude_estimation_of_zero():
    circ = Circuit(1)
    assert amplitude_estimation(circ, [0], [1], 0.05).estimate == pytest.approx(0, abs=1e-12)
    with pytest.raises(ConfigError):
        amplitude_estimation(circ, [0], [1], 1.5)


def test_qpe_distribution_normalized():
    d = qpe_distribution(0.3, 6)
    assert d.sum() == pytest.approx(1)


def test_success_amplitude_estimate():
    c = random_vector(2, np.random.default_rng(5)).entries
    cfg = NtcaConfig(c, monomial_power(1))
    res = run_ntca(cfg)
    from ntca.pipeline import build_combiner_circuit
    circ = build_combiner_circuit(c, cfg.P, cfg.Q, cfg.gamma)
    lay = circ.layout
    qs = lay.qubits("c", "r", "t", "s", "g", "da", "B")
    est = amplitude_estimation(circ, qs, [0] * len(qs), 0.02)
    assert abs(est.estimate - np.sqrt(res.success_probability)) <= 0.02
    amps, _ = postselected_amplitudes(circ, ("c", "r", "t", "s", "g"))
    assert np.linalg.norm(amps) == pytest.approx(est.true_value)


def test_node_estimates_within_beta(psi4):
    V = random_orthogonal(4, np.random.default_rng(6))
    layer = LayerSpec(V, exact(taylor_tanh(3)), real=True)
    nodes = estimate_nodes(psi4, layer, beta=0.05)
    assert len(nodes) == 4
    for nd in nodes:
        assert nd.error <= 0.05
        assert abs(nd.im) <= 0.05


def test_complex_node_estimates():
    c = random_vector(2, np.random.default_rng(7)).entries
    layer = LayerSpec(np.eye(2), monomial_power(1), monomial_power(1).scaled(1j))
    for nd in estimate_nodes(c, layer, beta=0.05):
        assert nd.error <= 0.05


def test_reconstruction_identity():
    a = np.array([0.3 - 0.2j, -0.5 + 0.1j, 0.05j])
    re = (np.abs(1 + a) ** 2 - np.abs(a) ** 2 - 1) / 2
    im = (1 + np.abs(a) ** 2 - np.abs(1 + 1j * a) ** 2) / 2
    assert np.allclose(re, a.real) and np.allclose(im, a.imag)
