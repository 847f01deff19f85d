import numpy as np
import pytest

import oracles as O
from ntca.errors import BudgetError, ConfigError, UnamplifiableError
from ntca.oracle import random_vector
from ntca.pipeline import (
    C0, NtcaConfig, build_combiner_circuit, build_P_unitary, build_real_circuit, error_ledger,
    bbht_expected_invocations, postselected_amplitudes, run_ntca, run_partial_ntca, run_real_ntca,
)
from ntca.poly import PolynomialSpec, chebyshev_T, exact, monomial_power, taylor_tanh


def rand(N, seed, real=False):
    c = random_vector(N, np.random.default_rng(seed)).entries
    if real:
        c = c.real / np.linalg.norm(c.real)
    return np.asarray(c, dtype=complex)


def block_response(blk, c, k):
    v = O.eigenstate(c, k)
    return np.vdot(v, blk.block() @ v)


def test_P_unitary_identity_gives_quarter_amplitudes():
    c = rand(4, 1, real=True)
    blk = build_P_unitary(c, monomial_power(1), 1.0)
    for k in range(1, 5):
        assert np.isclose(block_response(blk, c, k), c[k - 1].real / 4, atol=1e-9)


def test_P_unitary_basis_input():
    p = taylor_tanh(2)
    blk = build_P_unitary([1, 0], p, 1.0)
    assert np.isclose(block_response(blk, [1, 0], 1), p(1.0) / 4, atol=1e-9)


def test_zero_polynomial_gives_zero_block():
    c = rand(2, 3)
    blk = build_P_unitary(c, PolynomialSpec.zero(), 1.0)
    for k in (1, 2):
        assert abs(block_response(blk, c, k)) < 1e-12
    with pytest.raises(UnamplifiableError):
        run_ntca(NtcaConfig(c, PolynomialSpec.zero()))


def test_success_probability_formula():
    c = rand(4, 7)
    P, Q = exact(taylor_tanh(3)), monomial_power(2)
    g = 1.0
    amps, _ = postselected_amplitudes(build_combiner_circuit(c, P, Q, g), ("c", "r", "t", "s", "g"))
    measured = float(np.vdot(amps, amps).real)
    assert measured == pytest.approx(O.success_probability(c, P, Q, g), abs=1e-9)


def test_identity_on_real_input_returns_input():
    c = rand(4, 2, real=True)
    res = run_ntca(NtcaConfig(c, monomial_power(1)))
    assert O.global_phase_fidelity(res.output_state.amplitudes, c) >= 1 - 1e-10
    assert res.queries_per_invocation == 2 * (4 * 1 + C0)


def test_square_on_balanced_input_is_uniform():
    c = np.array([1, 1]) / np.sqrt(2)
    res = run_ntca(NtcaConfig(c, monomial_power(2)))
    assert np.allclose(np.abs(res.output_state.amplitudes), [np.sqrt(0.5)] * 2, atol=1e-9)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 9])
def test_query_count_per_invocation(d):
    c = rand(2, d)
    circ = build_combiner_circuit(c, chebyshev_T(d), chebyshev_T(d), 1.0)
    assert circ.query_count_U + circ.query_count_Udag == 2 * (4 * d + C0)


@pytest.mark.parametrize("seed", range(3))
def test_tanh_per_point_error(seed):
    c = rand(4, 100 + seed)
    P = exact(taylor_tanh(5))
    cfg = NtcaConfig(c, P, P, epsilon=1e-2)
    res = run_ntca(cfg)
    assert np.abs(res.target - O.ntca_target(c, P, P)).max() < 1e-12
    assert res.per_point_error <= 1e-2 / 4
    assert res.success_probability == pytest.approx(O.success_probability(c, P, P, cfg.gamma), abs=1e-9)


def test_budget_violation_raises():
    c = rand(4, 5)
    with pytest.raises(BudgetError):
        run_ntca(NtcaConfig(c, taylor_tanh(5), epsilon=1e-2))
    # loose enough epsilon: the function itself is the target
    res = run_ntca(NtcaConfig(c, taylor_tanh(5), epsilon=0.2))
    assert np.allclose(res.target, np.tanh(c.real))
    assert res.per_point_error <= 0.2 / 4


def test_gamma_below_sup_rejected():
    with pytest.raises(ConfigError):
        run_ntca(NtcaConfig(rand(2, 0), monomial_power(1), gamma=0.5))


def test_partial_with_full_range_matches():
    c = rand(4, 11)
    P = exact(taylor_tanh(3))
    a = run_ntca(NtcaConfig(c, P, P))
    b = run_partial_ntca(NtcaConfig(c, P, P), N1=4)
    assert O.global_phase_fidelity(a.output_state.amplitudes, b.output_state.amplitudes) >= 1 - 1e-9


def test_partial_prefix():
    c = rand(4, 12, real=True)
    res = run_partial_ntca(NtcaConfig(c, monomial_power(1)), N1=2)
    want = np.concatenate([c[:2].real, [0, 0]])
    assert O.global_phase_fidelity(res.output_state.amplitudes, want) >= 1 - 1e-9
    assert res.per_point_error <= 1e-2 / 4


def test_partial_three_of_four():
    c = rand(4, 13)
    P = monomial_power(2)
    res = run_partial_ntca(NtcaConfig(c, P), N1=3)
    want = np.concatenate([c[:3].real ** 2, [0]])
    assert O.global_phase_fidelity(res.output_state.amplitudes, want) >= 1 - 1e-9


def test_partial_single_label_is_deterministic():
    c = rand(4, 14)
    res = run_partial_ntca(NtcaConfig(c, monomial_power(1)), N1=1)
    assert abs(res.output_state.amplitudes[0]) == pytest.approx(1, abs=1e-9)


def test_partial_range_checked():
    with pytest.raises(ConfigError):
        NtcaConfig(rand(4, 0), monomial_power(1), N1=5)


def test_real_variant():
    c = rand(4, 21, real=True)
    res = run_real_ntca(NtcaConfig(c, monomial_power(1)))
    assert res.flags == 3
    assert res.success_probability == pytest.approx(1 / 16, abs=1e-9)
    full = run_ntca(NtcaConfig(c, monomial_power(1)))
    assert O.global_phase_fidelity(res.output_state.amplitudes, full.output_state.amplitudes) >= 1 - 1e-9
    circ = build_real_circuit(c, monomial_power(1), 1.0)
    assert [name for name, _ in circ.layout.registers][:3] == ["t", "s", "g"]


def test_real_variant_rejects_complex_polynomial():
    with pytest.raises(ConfigError):
        run_real_ntca(NtcaConfig(rand(2, 0), monomial_power(1).scaled(1j), variant="real_only"))


def test_ledger_exact_polynomial():
    c = rand(4, 31)
    cfg = NtcaConfig(c, exact(taylor_tanh(3)), epsilon=1e-2)
    led = error_ledger(cfg)
    assert led["approx_P"].measured == 0
    assert led["part_P"].measured <= 1e-2 / 8
    assert led.ok


def test_ledger_tanh_budget():
    c = rand(4, 32)
    P = taylor_tanh(8)
    cfg = NtcaConfig(c, P, P, epsilon=1e-2)
    led = error_ledger(cfg)
    assert led["combined"].budget == pytest.approx(2.5e-3)
    assert led["approx_P"].budget == pytest.approx(6.25e-4)
    assert led["qsvt_Q"].budget == pytest.approx(6.25e-4)
    assert led["part_Q"].budget == pytest.approx(1.25e-3)
    assert led.ok


def test_bbht_expected_cost_scales_as_inverse_sqrt():
    r = bbht_expected_invocations(1e-3) / bbht_expected_invocations(2e-3)
    assert np.sqrt(2) * 0.75 <= r <= np.sqrt(2) * 1.25


def test_amplification_modes_are_seeded():
    c = rand(2, 40)
    cfg = dict(c=c, P=monomial_power(1), amplification="amplitude_amplify", seed=9)
    a, b = run_ntca(NtcaConfig(**cfg)), run_ntca(NtcaConfig(**cfg))
    assert a.queries_controlled_U == b.queries_controlled_U
    assert a.queries_controlled_U % a.queries_per_invocation == 0
    m = run_ntca(NtcaConfig(c, monomial_power(1), amplification="measure_until_success", seed=2))
    assert m.expected_queries == pytest.approx(m.queries_per_invocation / m.success_probability)
