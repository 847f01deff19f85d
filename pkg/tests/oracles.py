"""Independent reference computations used by the tests.

Nothing here imports the circuit builders: every value is obtained from
closed-form linear algebra on plain numpy arrays.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

# tanh(x) = sum_j TANH_COEFFS[j] x^(2j+1), from a symbolic series expansion
TANH_COEFFS = [
    Fraction(1), Fraction(-1, 3), Fraction(2, 15), Fraction(-17, 315), Fraction(62, 2835),
    Fraction(-1382, 155925), Fraction(21844, 6081075), Fraction(-929569, 638512875),
    Fraction(6404582, 10854718875), Fraction(-443861162, 1856156927625),
    Fraction(18888466084, 194896477400625),
]

# max |tanh(x) - first d terms| on 10001 equispaced points, computed at 30 digits
TANH_TAYLOR_ERRORS = {
    1: 0.23840584404423512, 2: 0.09492748928909822, 3: 0.03840584404423511, 4: 0.015562409924018857,
    5: 0.006307078612136347, 6: 0.0025561569177658503, 7: 0.0010359711188066309, 8: 0.0004198632682446874,
    9: 0.0001701641727008986, 10: 6.896494154265387e-05, 11: 2.7950438026640633e-05,
    12: 1.1327885856676203e-05,
}

# fewest Taylor terms whose grid error is at most eps (from the table above)
MIN_TERMS = {1e-2: 5, 1e-3: 8, 1e-4: 10}


def tanh_taylor(x, terms: int):
    x = np.asarray(x, dtype=complex)
    return sum(float(TANH_COEFFS[j]) * x ** (2 * j + 1) for j in range(terms))


def tail_bound(terms: int) -> float:
    return 5 * np.sqrt(np.pi) / (1 - 2 / np.pi) * (2 / np.pi) ** (terms + 1)


def basis(dim: int, k: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[k] = 1
    return v


def eigenstate(c, k: int, imag: bool = False) -> np.ndarray:
    """|k>[(c + s e_k)|0>_B + (c - s e_k)|1>_B]/2 on (ad, da, B), s = 1 or i; k is 1-based."""
    c = np.asarray(c, dtype=complex)
    ek = basis(len(c), k - 1)
    s = 1j if imag else 1.0
    return np.kron(ek, (np.kron(c + s * ek, [1, 0]) + np.kron(c - s * ek, [0, 1])) / 2)


def reflection_eigenvalues(x) -> list[complex]:
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.clip(1 - x * x, 0, None))
    return list(-x + 1j * r) + list(-x - 1j * r)


def wx_qsp(psi, x) -> np.ndarray:
    """<0| e^{i psi_0 Z} W(x) ... W(x) e^{i psi_d Z} |0> by explicit 2x2 products."""
    out = []
    for xv in np.atleast_1d(x):
        s = np.sqrt(max(0.0, 1 - xv * xv))
        W = np.array([[xv, 1j * s], [1j * s, xv]])
        M = np.diag([np.exp(1j * psi[0]), np.exp(-1j * psi[0])])
        for p in psi[1:]:
            M = M @ W @ np.diag([np.exp(1j * p), np.exp(-1j * p)])
        out.append(M[0, 0])
    return np.array(out)


def matrix_function(A: np.ndarray, f) -> np.ndarray:
    lam, V = np.linalg.eigh(A)
    return V @ np.diag(f(lam)) @ V.conj().T


def ntca_target(c, P, Q=None) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    out = np.asarray(P(c.real), dtype=complex)
    if Q is not None:
        out = out + np.asarray(Q(c.imag), dtype=complex)
    return out


def success_probability(c, P, Q, gamma: float) -> float:
    t = ntca_target(c, P, Q)
    return float(np.sum(np.abs(t) ** 2) / (64 * gamma**2 * len(t)))


def normalized(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


def global_phase_fidelity(a, b) -> float:
    return float(abs(np.vdot(normalized(a), normalized(b))) ** 2)


def nested(psi, layers) -> np.ndarray:
    """sum_k F(sum_j V_kj h_j) layer by layer, truncated to each layer's width."""
    h = np.asarray(psi, dtype=complex)
    for V, F, width in layers:
        z = V @ np.concatenate([h, np.zeros(V.shape[0] - len(h))])
        h = F(z)[:width]
    return h
