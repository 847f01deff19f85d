import numpy as np
import pytest

from ntca.errors import CircuitError, DenseCapError, ProjectionError
from ntca.statevector import (
    Circuit, Gate, Layout, QuantumState, apply_gate, dense_unitary, fidelity, gate_matrix, marginal, project,
    run_circuit,
)

S2 = 1 / np.sqrt(2)


def test_x_flips_zero():
    out = apply_gate(QuantumState.zero(1), Gate("x", (0,)))
    assert np.allclose(out.amplitudes, [0, 1])


def test_hadamard_on_zero():
    out = apply_gate(QuantumState.zero(1), Gate("h", (0,)))
    assert np.allclose(out.amplitudes, [S2, S2])


def test_controlled_z_on_bell_pair():
    bell = QuantumState(np.array([S2, 0, 0, S2]), 2)
    out = apply_gate(bell, Gate("z", (1,), controls=(0,), control_values=(1,)))
    assert np.allclose(out.amplitudes, [S2, 0, 0, -S2])


def test_qubit_zero_is_most_significant():
    out = apply_gate(QuantumState.zero(3), Gate("x", (0,)))
    assert out.amplitudes[4] == 1


def test_empty_circuit_is_identity():
    rng = np.random.default_rng(0)
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi = QuantumState(v / np.linalg.norm(v), 3)
    assert np.allclose(run_circuit(psi, Circuit(3)).amplitudes, psi.amplitudes)


def test_hh_is_identity():
    c = Circuit(1)
    c.add("h", 0)
    c.add("h", 0)
    assert np.allclose(run_circuit(QuantumState.zero(1), c).amplitudes, [1, 0])


def test_dense_matrices():
    assert np.allclose(dense_unitary(Circuit(1, [Gate("x", (0,))])), [[0, 1], [1, 0]])
    assert np.allclose(dense_unitary(Circuit(1, [Gate("s", (0,))])), np.diag([1, 1j]))
    theta = 0.7
    assert np.allclose(gate_matrix("rz", (theta,)), np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)]))


def test_negative_control_value():
    c = Circuit(2)
    c.add("x", 1, controls=0, values=0)
    assert np.allclose(run_circuit(QuantumState.zero(2), c).amplitudes, [0, 1, 0, 0])


def test_adjoint_inverts():
    rng = np.random.default_rng(1)
    c = Circuit(3)
    for _ in range(20):
        kind = rng.choice(["h", "x", "s", "rz", "ry", "z"])
        q = int(rng.integers(3))
        ctrl = [int(x) for x in rng.choice([i for i in range(3) if i != q], size=rng.integers(0, 3), replace=False)]
        params = (float(rng.normal()),) if kind in ("rz", "ry") else ()
        c.add(kind, q, params, controls=ctrl)
    M = dense_unitary(c)
    assert np.allclose(dense_unitary(c.adjoint()) @ M, np.eye(8), atol=1e-12)


def test_compose_and_query_counters():
    U = Circuit(1, [Gate("h", (0,))]).as_oracle("U")
    assert U.queries == {"U": 1}
    big = Circuit(2)
    big.compose(U, [1], controls=[0])
    big.compose(U.adjoint(), [1])
    assert big.query_count_U == 1 and big.query_count_Udag == 1


def test_projection_examples():
    psi = QuantumState(np.array([0.6, 0.8, 0, 0]), 2)
    out = project(psi, [0], "0")
    assert np.isclose(out.probability, 1.0)
    assert np.allclose(out.post_state.amplitudes, [0.6, 0.8])
    plus = QuantumState(np.array([S2, S2]), 1)
    half = project(plus, [0], "1")
    assert np.isclose(half.probability, 0.5)
    assert out.post_state.num_qubits == 1


def test_projection_zero_probability_raises():
    with pytest.raises(ProjectionError):
        project(QuantumState.zero(1), [0], "1")


def test_projection_bad_subset():
    with pytest.raises(CircuitError):
        project(QuantumState.zero(2), [0, 0], "00")


def test_marginal():
    psi = QuantumState(np.array([0.6, 0, 0, 0.8]), 2)
    assert np.allclose(marginal(psi, [1]), [0.36, 0.64])


def test_fidelity_examples():
    z, o = QuantumState.zero(1), QuantumState.basis(1, 1)
    plus = QuantumState(np.array([S2, S2]), 1)
    assert fidelity(z, z) == pytest.approx(1)
    assert fidelity(z, o) == pytest.approx(0)
    assert fidelity(z, plus) == pytest.approx(0.5)


def test_dense_cap():
    with pytest.raises(DenseCapError):
        dense_unitary(Circuit(5), cap=4)


def test_invalid_gates():
    with pytest.raises(CircuitError):
        Gate("cnot", (0,))
    with pytest.raises(CircuitError):
        Gate("x", (0,), controls=(0,), control_values=(1,))
    with pytest.raises(CircuitError):
        Circuit(1).add("x", 3)


def test_layout_registers():
    lay = Layout([("a", 1), ("b", 2)])
    assert lay["b"] == [1, 2] and lay.width == 3
    st = QuantumState.from_registers(lay, {"b": 2})
    assert st.amplitudes[2] == 1


def test_json_round_trip():
    c = Circuit(Layout([("a", 1), ("b", 1)]))
    c.add("ry", 1, 0.3, controls=0)
    c.add("unitary", [0, 1], matrix=np.eye(4)[[1, 0, 3, 2]])
    back = Circuit.from_json(c.to_json())
    assert np.allclose(dense_unitary(back), dense_unitary(c))
