"""Neural networks on amplitudes built from repeated nonlinear transformations.

A layer applies a unitary weight matrix V and then the activation
F(psi) = P(Re psi) + Q(Im psi) entrywise. Layer l runs the combiner circuit
with oracle V^(l) U. Between layers the known 1/(8 gamma sqrt(N_l)) prefactor
of the post-selected branch is removed by singular value amplification with
an odd polynomial close to Gamma x on a small interval.

Simulation shortcut: after amplification the next layer's data lives on the
flag-free branch of a wide register. The statevector of that branch is
isometrically relabelled onto ceil(log2(N+1)) qubits (the node values plus
one slot holding the norm of everything else) and re-synthesized as an
oracle. The query count of the relabelled oracle is charged at the full
cost of the circuit it stands for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import linprog

from .errors import CircuitError, ConfigError, DenseCapError, PolynomialError
from .oracle import AmplitudeVector, synthesize_state_prep
from .pipeline import (FULL_FLAGS, NtcaConfig, NtcaResult, build_combiner_circuit, postselected_amplitudes,
                       run_ntca)
from .poly import PolynomialSpec, monomial_power, sup_norm
from .qsp import compute_phase_factors
from .qsvt import _branch_from, _sequence
from .statevector import Circuit, Layout, simulate

UNITARY_TOL = 1e-10
MAX_LAYERS = 3
AMP_DELTA = 0.1
AMP_ETA = 1e-3
AMP_MAX_DEGREE = 199
AE_MAX_BITS = 24


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------

@dataclass
class LayerSpec:
    V: np.ndarray
    P: PolynomialSpec
    Q: PolynomialSpec = field(default_factory=PolynomialSpec.zero)
    width: int | None = None
    real: bool = False

    def __post_init__(self):
        V = np.asarray(self.V, dtype=complex)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise ConfigError("weight matrix must be square")
        dim = 1 << max(1, math.ceil(math.log2(V.shape[0])))
        if V.shape[0] < dim:
            V = np.block([[V, np.zeros((V.shape[0], dim - V.shape[0]))],
                          [np.zeros((dim - V.shape[0], V.shape[0])), np.eye(dim - V.shape[0])]])
        err = float(np.abs(V.conj().T @ V - np.eye(dim)).max())
        if err > UNITARY_TOL:
            raise ConfigError(f"weight matrix is not unitary (residual {err:.2e})")
        if self.real and np.abs(V.imag).max() > UNITARY_TOL:
            raise ConfigError("weight matrix flagged real has complex entries")
        self.V = V
        if self.width is None:
            self.width = dim

    @property
    def n(self) -> int:
        return int(math.log2(self.V.shape[0]))

    @property
    def gamma(self) -> float:
        return max(sup_norm(self.P), sup_norm(self.Q))

    def activation(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return self.P(z.real) + self.Q(z.imag)

    def to_json(self) -> dict:
        return {"V": [[[float(v.real), float(v.imag)] for v in row] for row in self.V],
                "P": self.P.to_json(), "Q": self.Q.to_json(), "width": self.width, "real": self.real}


def random_orthogonal(N: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(N, N)))
    return q * np.sign(np.diag(r))


def classical_network(psi, layers: list[LayerSpec]) -> np.ndarray:
    """Unnormalized nested evaluation sum_l F(sum_k v_lk F(...)) restricted to each width."""
    h = np.asarray(psi, dtype=complex)
    for layer in layers:
        dim = layer.V.shape[0]
        x = np.zeros(dim, dtype=complex)
        x[: min(len(h), dim)] = h[:dim]
        a = layer.activation(layer.V @ x)
        a[layer.width:] = 0
        h = a
    return h[: layers[-1].width]


def layer_oracle(U: Circuit, V: np.ndarray) -> Circuit:
    """V U as a single oracle use."""
    if 2**U.num_qubits != V.shape[0]:
        raise CircuitError(f"weight matrix of size {V.shape[0]} does not match {U.num_qubits} qubits")
    circ = Circuit(U.layout)
    circ.compose(U)
    circ.add("unitary", list(range(U.num_qubits)), matrix=V)
    return circ.as_oracle("U")


def _state_of(U: Circuit) -> np.ndarray:
    psi = np.zeros(2**U.num_qubits, dtype=complex)
    psi[0] = 1
    return simulate(psi, U)


@dataclass
class QnnResult:
    ntca: NtcaResult
    classical: np.ndarray
    output: np.ndarray
    per_point_error: float
    error_bound: float
    psi_queries_per_run: int
    psi_queries_total: float
    amplification_degrees: list[int]
    layer_queries: list[int]

    @property
    def ok(self) -> bool:
        return self.per_point_error <= self.error_bound

    def to_json(self) -> dict:
        pair = lambda v: [[float(z.real), float(z.imag)] for z in v]  # noqa: E731
        return {"output": pair(self.output), "classical": pair(self.classical),
                "per_point_error": self.per_point_error, "error_bound": self.error_bound,
                "psi_queries_per_run": self.psi_queries_per_run, "psi_queries_total": self.psi_queries_total,
                "amplification_degrees": self.amplification_degrees, "layer_queries": self.layer_queries,
                "success_probability": self.ntca.success_probability}


def _input_oracle(inp) -> tuple[Circuit, np.ndarray]:
    if isinstance(inp, Circuit):
        return inp, _state_of(inp)
    v = inp if isinstance(inp, AmplitudeVector) else AmplitudeVector(inp)
    U = synthesize_state_prep(v)
    return U, v.padded()


def _final(result: NtcaResult, layer: LayerSpec, classical: np.ndarray, eps: float, extra_bound: float,
           psi_per_run: int, amp_degrees, layer_queries) -> QnnResult:
    # b carries the rescaled amplitudes; the first `width` entries are the node values
    out = result.b[: layer.width]
    err = float(np.max(np.abs(out - classical)))
    bound = eps / layer.width + extra_bound
    total = psi_per_run * (result.expected_queries / max(result.queries_per_invocation, 1))
    return QnnResult(result, classical, out, err, bound, psi_per_run, total, amp_degrees, layer_queries)


def single_layer(inp, layer: LayerSpec, eps: float = 1e-2, amplification="none", seed: int = 0) -> QnnResult:
    """Output proportional to sum_k F(sum_j v_kj psi_j) |k>."""
    return multi_layer(inp, [layer], eps, amplification, seed)


# ---------------------------------------------------------------------------
# uniform singular value amplification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmplificationPolynomial:
    poly: PolynomialSpec
    gain: float
    interval: float
    fit_error: float


@lru_cache(maxsize=64)
def amplification_polynomial(gain: float, tol: float, delta: float = AMP_DELTA, eta: float = AMP_ETA,
                             max_degree: int = AMP_MAX_DEGREE) -> AmplificationPolynomial:
    """Lowest odd degree p with |p(x) - gain x| <= tol on |x| <= (1-delta)/gain and |p| <= 1 - eta.

    Each candidate degree is a linear program over odd Chebyshev coefficients.
    """
    if gain < 1:
        raise PolynomialError("amplification gain must be at least 1")
    a = (1 - delta) / gain

    xa = a * (0.5 - 0.5 * np.cos(np.linspace(0, np.pi, 100)))

    def fit(D):
        ks = np.arange(1, D + 1, 2)
        m = len(ks)
        Ta = np.cos(np.outer(np.arccos(xa), ks))
        # a degree-D cosine sum bounded by M on a theta grid of step h is bounded by M / cos(D h / 2)
        # everywhere, so this step keeps |p| <= (1 - eta) / (1 - eta / 2) < 1 without refinement
        h = 2 * math.acos(1 - eta / 2) / D
        theta = np.linspace(0, np.pi / 2, math.ceil(np.pi / 2 / h) + 1)
        Tb = np.cos(np.outer(theta, ks))
        cost = np.zeros(m + 1)
        cost[-1] = 1
        fit_rows = np.vstack([np.hstack([Ta, -np.ones((len(xa), 1))]), np.hstack([-Ta, -np.ones((len(xa), 1))])])
        active = np.zeros(len(theta), dtype=bool)
        active[::8] = True
        # grid rows enter only once violated; the final check covers the whole grid
        for _ in range(50):
            Tact = Tb[active]
            A = np.vstack([fit_rows, np.hstack([Tact, np.zeros((len(Tact), 1))]),
                           np.hstack([-Tact, np.zeros((len(Tact), 1))])])
            b = np.concatenate([gain * xa, -gain * xa, np.full(2 * len(Tact), 1 - eta)])
            res = linprog(cost, A_ub=A, b_ub=b, bounds=[(None, None)] * m + [(0, None)], method="highs")
            if not res.success:
                return None, np.inf
            viol = np.abs(Tb @ res.x[:m]) > 1 - eta + 1e-12
            if not viol.any():
                coef = np.zeros(D + 1)
                coef[ks] = res.x[:m]
                return coef, float(res.x[-1])
            active |= viol
        return None, np.inf

    # the fit error decays roughly geometrically in D: extrapolate, then bisect
    lo, hi, best = 1, None, None
    D = max(3, 2 * int(gain) + 1)
    prev = None
    while D <= max_degree:
        coef, t = fit(D)
        if t <= tol:
            hi, best = D, (coef, t)
            break
        lo = D
        step = int(0.3 * D)
        if prev is not None and np.isfinite(t) and np.isfinite(prev[1]) and t < prev[1]:
            rate = math.log(prev[1] / t) / (D - prev[0])
            step = math.ceil(1.1 * math.log(t / tol) / rate)
        prev = (D, t)
        nxt = D + min(max(step, 2), D // 2 + 2)
        D = min(nxt | 1, max_degree | 1) if D < max_degree else max_degree + 1
    if best is None:
        raise PolynomialError(f"no odd amplification polynomial of degree <= {max_degree} reaches {tol:.1e}")
    while hi - lo > 2:
        mid = (lo + hi) // 2
        mid += 1 - mid % 2
        if mid >= hi:
            break
        coef, t = fit(mid)
        if t <= tol:
            hi, best = mid, (coef, t)
        else:
            lo = mid
    coef, t = best
    p = PolynomialSpec(coef, label=f"amp{gain:.3g}")
    xs = np.linspace(-a, a, 2001)
    err = float(np.max(np.abs(p(xs).real - gain * xs)))
    if sup_norm(p) > 1:
        raise PolynomialError("amplification polynomial exceeds 1 in magnitude")
    return AmplificationPolynomial(p, gain, a, max(err, t))


def _compress(vec: np.ndarray, width: int) -> AmplitudeVector:
    """(v_1..v_width, norm of the rest) as a normalized vector."""
    head = vec[:width]
    rest = max(0.0, 1.0 - float(np.vdot(head, head).real))
    out = np.concatenate([head, [math.sqrt(rest)]])
    return AmplitudeVector(out / np.linalg.norm(out))


@dataclass
class _Stage:
    oracle: Circuit
    c: AmplitudeVector
    cost: int          # U_psi uses per oracle use
    width: int         # active data entries


def _lift(stage: _Stage, layer: LayerSpec, nxt: LayerSpec, eps_layer: float, seed: int):
    """Run one hidden layer and return the stage for the next layer."""
    g = layer.gamma
    N1 = layer.width
    A = build_combiner_circuit(stage.c, layer.P, layer.Q, g, eps_layer / (16 * g * stage.c.N), N1, stage.oracle)
    q_layer = A.query_count_U + A.query_count_Udag
    lay = A.layout
    At = Circuit(lay)
    At.compose(A)
    # next weights act on the address register
    Vn = nxt.V
    n_ad = len(lay["ad"])
    if Vn.shape[0] != 2**n_ad:
        raise ConfigError(f"layer weights of size {Vn.shape[0]} do not fit a {n_ad}-qubit address register")
    At.add("unitary", lay["ad"], matrix=Vn)
    gain = 8 * g * math.sqrt(N1)
    lip = max(sup_norm(_derivative(nxt.P)), sup_norm(_derivative(nxt.Q)), 1e-12)
    tol = eps_layer / (4 * nxt.width * lip)
    amp = amplification_polynomial(gain, tol)
    amps, _ = postselected_amplitudes(A, FULL_FLAGS)
    sigma = float(np.linalg.norm(amps))
    if sigma > amp.interval:
        raise PolynomialError(f"branch amplitude {sigma:.4f} exceeds the amplification window {amp.interval:.4f}; "
                              f"node values too large for gain {gain:.3g}")
    out_q = lay.qubits(*FULL_FLAGS, "da", "B")
    proj_out = (out_q, [0] * len(out_q))
    proj_in = (list(range(At.num_qubits)), [0] * At.num_qubits)
    pf = compute_phase_factors(amp.poly, tol=1e-10, degree_cap=AMP_MAX_DEGREE, seed=seed)
    circ, _ = _sequence(At, [], [_branch_from(pf, (), pf.degree)], proj_in, proj_out)
    # amplified branch: s=0, flags=0, data=0, B=0; address free
    psi = np.zeros(2**circ.num_qubits, dtype=complex)
    psi[0] = 1
    out = simulate(psi, circ).reshape((2,) * circ.num_qubits)
    idx = [0] * circ.num_qubits
    ad_q = [q + 1 for q in lay["ad"]]
    for q in ad_q:
        idx[q] = slice(None)
    node = out[tuple(idx)].reshape(-1)
    c_next = _compress(node, nxt.width)
    U_next = synthesize_state_prep(c_next)
    cost = stage.cost * q_layer * pf.degree
    return _Stage(U_next, c_next, cost, nxt.width), pf.degree, q_layer, amp.fit_error * lip


def _derivative(p: PolynomialSpec) -> PolynomialSpec:
    return PolynomialSpec(C.chebder(p.cheb) if p.degree > 0 else np.zeros(1))


def multi_layer(inp, layers: list[LayerSpec], eps: float = 1e-2, amplification="none", seed: int = 0,
                max_layers: int = MAX_LAYERS) -> QnnResult:
    if not layers:
        raise ConfigError("need at least one layer")
    if len(layers) > max_layers:
        raise ConfigError(f"{len(layers)} layers exceeds the cap of {max_layers}")
    U_psi, psi = _input_oracle(inp)
    first = layers[0]
    if 2**U_psi.num_qubits != first.V.shape[0]:
        raise ConfigError("first layer weights do not match the input register")
    eps_layer = eps / len(layers)
    U1 = layer_oracle(U_psi, first.V)
    c1 = AmplitudeVector(first.V @ psi)
    stage = _Stage(U1, c1, 1, first.width)
    degrees, layer_q, extra = [], [], 0.0
    for layer, nxt in zip(layers[:-1], layers[1:]):
        stage, D, q, prop = _lift(stage, layer, nxt, eps_layer, seed)
        degrees.append(D)
        layer_q.append(q)
        extra += prop
    last = layers[-1]
    cfg = NtcaConfig(stage.c, last.P, last.Q, last.gamma, eps_layer, "partial", last.width, amplification,
                     seed, oracle=stage.oracle)
    res = run_ntca(cfg)
    layer_q.append(res.queries_per_invocation)
    classical = classical_network(psi, layers)
    return _final(res, last, classical, eps, extra, stage.cost * res.queries_per_invocation, degrees, layer_q)


def two_layer(inp, layer1: LayerSpec, layer2: LayerSpec, eps: float = 1e-2, amplification="none",
              seed: int = 0) -> QnnResult:
    return multi_layer(inp, [layer1, layer2], eps, amplification, seed)


# ---------------------------------------------------------------------------
# amplitude estimation and node readout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmplitudeEstimate:
    estimate: float
    true_value: float
    bits: int
    invocations: int
    queries: int

    def __float__(self):
        return self.estimate


def _fejer(delta: np.ndarray, M: int) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    num = np.sin(np.pi * delta) ** 2
    den = (M * np.sin(np.pi * delta / M)) ** 2
    out = np.ones_like(delta)
    mask = np.abs(np.sin(np.pi * delta / M)) > 1e-15
    out[mask] = num[mask] / den[mask]
    return out


def ae_bits(beta: float) -> int:
    return math.ceil(math.log2(1 / beta)) + 2


def qpe_distribution(amplitude: float, bits: int) -> np.ndarray:
    """Outcome distribution of phase estimation on the Grover iterate for a given amplitude."""
    M = 2**bits
    theta = math.asin(min(1.0, max(0.0, amplitude)))
    y = np.arange(M)
    w = M * theta / math.pi
    return 0.5 * _fejer(y - w, M) + 0.5 * _fejer(y + w, M)


def amplitude_estimation(circuit: Circuit, qubits, values, beta: float, mode: str = "exact",
                         rng: np.random.Generator | None = None, cap: int = AE_MAX_BITS) -> AmplitudeEstimate:
    """Estimate |a|, a the amplitude of the pattern ``values`` on ``qubits`` after ``circuit``|0>.

    The evaluation register has ceil(log2(1/beta)) + 2 qubits. ``exact`` picks
    the most likely phase-estimation outcome from the analytic distribution,
    ``sampled`` draws one outcome from it, ``statevector`` runs phase estimation
    on the dense Grover iterate (small circuits only).
    """
    if not 0 < beta < 1:
        raise ConfigError("beta must lie in (0, 1)")
    bits = ae_bits(beta)
    if bits > cap:
        raise DenseCapError(f"{bits} evaluation qubits exceed the cap of {cap}")
    qubits, values = list(qubits), list(values)
    psi = np.zeros(2**circuit.num_qubits, dtype=complex)
    psi[0] = 1
    out = simulate(psi, circuit).reshape((2,) * circuit.num_qubits)
    idx = [slice(None)] * circuit.num_qubits
    for q, v in zip(qubits, values):
        idx[q] = v
    good = out[tuple(idx)]
    a = float(np.sqrt(np.vdot(good, good).real))
    M = 2**bits
    if mode == "exact":
        y = int(np.argmax(qpe_distribution(a, bits)))
    elif mode == "sampled":
        rng = rng or np.random.default_rng(0)
        dist = qpe_distribution(a, bits)
        y = int(rng.choice(M, p=dist / dist.sum()))
    elif mode == "statevector":
        y = _qpe_statevector(circuit, qubits, values, bits)
    else:
        raise ConfigError(f"unknown estimation mode {mode!r}")
    est = abs(math.sin(math.pi * y / M))
    inv = 2 * (M - 1) + 1
    per = circuit.query_count_U + circuit.query_count_Udag
    return AmplitudeEstimate(est, a, bits, inv, inv * per)


def _qpe_statevector(circuit: Circuit, qubits, values, bits: int) -> int:
    """Most likely outcome of phase estimation run on the dense Grover iterate."""
    from .statevector import dense_unitary

    A = dense_unitary(circuit, cap=10)
    dim = A.shape[0]
    good = np.zeros(dim, dtype=bool)
    for i in range(dim):
        b = [(i >> (circuit.num_qubits - 1 - q)) & 1 for q in qubits]
        good[i] = b == list(values)
    S_chi = np.diag(np.where(good, -1.0, 1.0))
    S_0 = np.eye(dim)
    S_0[0, 0] = -1
    G = -A @ S_0 @ A.conj().T @ S_chi
    M = 2**bits
    start = A[:, 0]
    # sum_y |y> G^y |psi>, then inverse QFT on the evaluation register
    reg = np.zeros((M, dim), dtype=complex)
    v = start.copy()
    for y in range(M):
        reg[y] = v
        v = G @ v
    reg /= math.sqrt(M)
    reg = np.fft.fft(reg, axis=0) / math.sqrt(M)
    probs = np.sum(np.abs(reg) ** 2, axis=1)
    return int(np.argmax(probs))


@dataclass(frozen=True)
class NodeEstimate:
    k: int
    re: float
    im: float
    beta: float
    queries_used: int
    true_value: complex

    @property
    def error(self) -> float:
        return max(abs(self.re - self.true_value.real), abs(self.im - self.true_value.imag))

    def to_json(self) -> dict:
        return {"k": self.k, "re": self.re, "im": self.im, "beta": self.beta, "queries_used": self.queries_used,
                "true": [self.true_value.real, self.true_value.imag], "error": self.error}


def readout_polynomials(P: PolynomialSpec, Q: PolynomialSpec, imaginary: bool) -> tuple[PolynomialSpec, PolynomialSpec]:
    """(P^, Q^) with P^(x) + Q^(y) = (1 + F)/2, or (1 + iF)/2 when ``imaginary``."""
    one = PolynomialSpec.from_monomial([0.5])
    w = 0.5j if imaginary else 0.5
    return one + P.scaled(w), Q.scaled(w)


def estimate_nodes(inp, layer: LayerSpec, k_range=None, beta: float = 0.05, mode: str = "exact",
                   seed: int = 0) -> list[NodeEstimate]:
    """Re and Im of each node value a_k = F((V psi)_k) from three amplitude estimates.

    |a|, |1 + a| and |1 + i a| come from the combiner circuit with F, (1+F)/2 and
    (1+iF)/2; then Re a = (|1+a|^2 - 1 - |a|^2)/2, Im a = (1 + |a|^2 - |1+ia|^2)/2.
    """
    U_psi, psi = _input_oracle(inp)
    U = layer_oracle(U_psi, layer.V)
    c = AmplitudeVector(layer.V @ psi)
    N1 = layer.width
    k_range = range(1, N1 + 1) if k_range is None else k_range
    rng = np.random.default_rng(seed)
    variants = [(layer.P, layer.Q, 1.0), (*readout_polynomials(layer.P, layer.Q, False), 2.0),
                (*readout_polynomials(layer.P, layer.Q, True), 2.0)]
    circuits = []
    for P, Q, mult in variants:
        g = max(sup_norm(P), sup_norm(Q))
        circ = build_combiner_circuit(c, P, Q, g, 1e-12, N1, U)
        circuits.append((circ, mult * 8 * g * math.sqrt(N1)))
    truth = layer.activation(c.padded())
    out = []
    n = c.n
    for k in k_range:
        mags, used = [], 0
        for circ, scale in circuits:
            lay = circ.layout
            qs = lay.qubits(*FULL_FLAGS, "ad", "da", "B")
            vals = [0] * 5 + [((k - 1) >> (n - 1 - i)) & 1 for i in range(n)] + [0] * (n + 1)
            # each magnitude feeds the reconstruction with weight <= 2, so split beta four ways
            est = amplitude_estimation(circ, qs, vals, min(0.5, beta / (4 * scale)), mode, rng)
            mags.append(scale * est.estimate)
            used += est.queries
        m0, m1, m2 = mags
        re = (m1 * m1 - 1 - m0 * m0) / 2
        im = (1 + m0 * m0 - m2 * m2) / 2
        out.append(NodeEstimate(k, re, im, beta, used, complex(truth[k - 1])))
    return out


__all__ = [
    "AmplificationPolynomial", "AmplitudeEstimate", "LayerSpec", "NodeEstimate", "QnnResult",
    "amplification_polynomial", "amplitude_estimation", "classical_network", "estimate_nodes",
    "layer_oracle", "multi_layer", "qpe_distribution", "random_orthogonal", "readout_polynomials",
    "single_layer", "two_layer",
]
