"""End-to-end nonlinear transformation of complex amplitudes.

Given an oracle U with U|0> = sum_k c_k |k>, c_k = x_k + i y_k, the combiner
circuit outputs, after post-selecting five flag qubits (c, r, t, s, g) on 0,

    1/(8 gamma sqrt(N)) sum_k (P(x_k) + Q(y_k)) |k>.

The flags are: combiner c, real/imag selector r, parity selector t, QSP
signal s and the Hermitizing qubit g of G~.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .block_encoding import Kind, build_Gtilde, build_W
from .errors import BudgetError, ConfigError, UnamplifiableError
from .oracle import AmplitudeVector, synthesize_state_prep
from .poly import EVEN, ODD, PolynomialSpec, sup_norm
from .qsvt import QsvtCircuit, _degrees, _split, complex_poly_block, real_poly_block
from .statevector import Circuit, Layout, QuantumState, fidelity, simulate

P_FLOOR = 1e-12
BBHT_LAMBDA = 6 / 5
FULL_FLAGS = ("c", "r", "t", "s", "g")
REAL_FLAGS = ("t", "s", "g")
#: controlled W, W', W^dag, W'^dag each use the oracle twice
C0 = 4


class Variant(str, Enum):
    FULL = "full"
    PARTIAL = "partial"
    REAL_ONLY = "real_only"

    @classmethod
    def parse(cls, v) -> "Variant":
        try:
            return v if isinstance(v, Variant) else cls(str(v).lower())
        except ValueError as exc:
            raise ConfigError(f"unknown variant {v!r}") from exc


class Amplification(str, Enum):
    NONE = "none"
    MEASURE_UNTIL_SUCCESS = "measure_until_success"
    AMPLITUDE_AMPLIFY = "amplitude_amplify"

    @classmethod
    def parse(cls, v) -> "Amplification":
        try:
            return v if isinstance(v, Amplification) else cls(str(v).lower())
        except ValueError as exc:
            raise ConfigError(f"unknown amplification mode {v!r}") from exc


def _target_values(p: PolynomialSpec, x: np.ndarray) -> np.ndarray:
    f = p.target if p.target is not None else p
    return np.asarray(f(x), dtype=complex)


@dataclass
class NtcaConfig:
    """Inputs of one transformation run.

    ``P`` and ``Q`` are the implemented polynomials; their ``target`` callables
    (if any) are the functions the output is checked against, otherwise the
    polynomials themselves are the targets.
    """

    c: AmplitudeVector
    P: PolynomialSpec
    Q: PolynomialSpec = field(default_factory=PolynomialSpec.zero)
    gamma: float | None = None
    epsilon: float = 1e-2
    variant: Variant = Variant.FULL
    N1: int | None = None
    amplification: Amplification = Amplification.NONE
    seed: int = 0
    check_budget: bool = True
    oracle: Circuit | None = None

    def __post_init__(self):
        if not isinstance(self.c, AmplitudeVector):
            self.c = AmplitudeVector(self.c)
        self.variant = Variant.parse(self.variant)
        self.amplification = Amplification.parse(self.amplification)
        if self.gamma is None:
            self.gamma = max(sup_norm(self.P), sup_norm(self.Q))
        if self.N1 is None:
            self.N1 = self.N
        if not 1 <= self.N1 <= self.N:
            raise ConfigError(f"N1={self.N1} outside 1..{self.N}")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")

    @property
    def N(self) -> int:
        return self.c.N

    @property
    def approx_budget(self) -> float:
        return self.epsilon / (4 * self.N)

    @property
    def delta(self) -> float:
        """Phase-solver tolerance that makes the QSVT term fit its share of the budget."""
        return self.epsilon / (16 * max(self.gamma, 1e-300) * self.N)

    def validate(self) -> None:
        if self.gamma <= 0:
            raise UnamplifiableError("P and Q both vanish; nothing to transform")
        sup = max(sup_norm(self.P), sup_norm(self.Q))
        if sup > self.gamma * (1 + 1e-12):
            raise ConfigError(f"gamma={self.gamma} is below sup(|P|,|Q|)={sup}")
        if self.variant is Variant.REAL_ONLY and not (self.P.is_real and self.Q.is_zero):
            raise ConfigError("the three-flag variant needs a real P and no Q")
        if self.check_budget:
            for name, p in (("P", self.P), ("Q", self.Q)):
                if p.certified_error > self.approx_budget:
                    raise BudgetError(f"{name} approximation error {p.certified_error:.3e} exceeds "
                                      f"epsilon/(4N) = {self.approx_budget:.3e}")

    def to_json(self) -> dict:
        return {"c": self.c.to_json(), "P": self.P.to_json(), "Q": self.Q.to_json(), "gamma": self.gamma,
                "epsilon": self.epsilon, "variant": self.variant.value, "N1": self.N1,
                "amplification": self.amplification.value, "seed": self.seed}


@dataclass
class NtcaResult:
    output_state: QuantumState
    success_probability: float
    predicted_success_probability: float
    amplification_rounds: int
    queries_controlled_U: int
    expected_queries: float
    queries_per_invocation: int
    b: np.ndarray
    b_raw: np.ndarray
    target: np.ndarray
    per_point_error: float
    per_point_error_raw: float
    per_point_error_bound: float
    fidelity_vs_target: float
    flags: int
    invocations: int = 1

    def to_json(self) -> dict:
        pair = lambda v: [[float(z.real), float(z.imag)] for z in v]  # noqa: E731
        return {
            "success_probability": self.success_probability,
            "predicted_success_probability": self.predicted_success_probability,
            "amplification_rounds": self.amplification_rounds,
            "invocations": self.invocations,
            "queries_controlled_U": self.queries_controlled_U,
            "expected_queries": self.expected_queries,
            "queries_per_invocation": self.queries_per_invocation,
            "b": pair(self.b), "target": pair(self.target),
            "per_point_error": self.per_point_error,
            "per_point_error_raw": self.per_point_error_raw,
            "per_point_error_bound": self.per_point_error_bound,
            "fidelity_vs_target": self.fidelity_vs_target,
            "flags": self.flags,
            "output_state": self.output_state.to_json(),
        }


# ---------------------------------------------------------------------------
# circuits
# ---------------------------------------------------------------------------

def address_prep(n: int, N1: int) -> Circuit:
    """Uniform superposition over the first N1 address labels."""
    if N1 == 2**n:
        circ = Circuit(Layout([("ad", n)]))
        for q in range(n):
            circ.add("h", q)
        return circ
    v = np.zeros(2**n)
    v[:N1] = 1 / np.sqrt(N1)
    prep = synthesize_state_prep(v, name=None)
    return Circuit(Layout([("ad", n)]), prep.gates)


def _oracle(c, U: Circuit | None = None) -> tuple[AmplitudeVector, Circuit]:
    c = c if isinstance(c, AmplitudeVector) else AmplitudeVector(c)
    if U is not None and U.num_qubits != c.n:
        raise ConfigError(f"oracle acts on {U.num_qubits} qubits, data needs {c.n}")
    return c, (synthesize_state_prep(c) if U is None else U)


def shared_degrees(*polys: PolynomialSpec) -> tuple[int, int]:
    """(even, odd) call counts that fit every parity piece of every polynomial."""
    pieces, parities = [], []
    for p in polys:
        for q, par in zip(_split(p), (EVEN, ODD, EVEN, ODD)):
            pieces.append(q)
            parities.append(par)
    return _degrees(pieces, parities)


def build_P_unitary(c, P: PolynomialSpec, gamma: float, delta: float = 1e-9, kind=Kind.REAL_PART,
                    degrees: tuple[int, int] | None = None, U: Circuit | None = None) -> QsvtCircuit:
    """Four-flag block-encoding of P(A)/(4 gamma), A the Hermitian block of G~ (or G~')."""
    c, U = _oracle(c, U)
    if gamma <= 0:
        raise ConfigError("gamma must be positive")
    be = build_Gtilde(U, kind)
    scaled = P.scaled(1 / (4 * gamma), label=f"{P.label}/(4gamma)")
    return complex_poly_block(be, scaled, delta, N=c.N, check=False, layout="full", degrees=degrees)


def build_Q_unitary(c, Q: PolynomialSpec, gamma: float, delta: float = 1e-9,
                    degrees: tuple[int, int] | None = None, U: Circuit | None = None) -> QsvtCircuit:
    return build_P_unitary(c, Q, gamma, delta, Kind.IMAG_PART, degrees, U)


def combiner_layout(n: int) -> Layout:
    return Layout([(f, 1) for f in FULL_FLAGS] + [("ad", n), ("da", n), ("B", 1)])


def build_combiner_circuit(c, P: PolynomialSpec, Q: PolynomialSpec, gamma: float, delta: float = 1e-9,
                       N1: int | None = None, U: Circuit | None = None) -> Circuit:
    """Combiner circuit: H on c, address superposition, controlled W / W', controlled
    transformation blocks, controlled uncompute, H on c."""
    c, U = _oracle(c, U)
    n = c.n
    N1 = c.N if N1 is None else N1
    degrees = shared_degrees(P.scaled(1 / (4 * gamma)), Q.scaled(1 / (4 * gamma)))
    Pu = build_P_unitary(c, P, gamma, delta, Kind.REAL_PART, degrees, U)
    Qu = build_P_unitary(c, Q, gamma, delta, Kind.IMAG_PART, degrees, U)
    lay = combiner_layout(n)
    cq = lay["c"][0]
    sysq = lay.qubits("ad", "da", "B")
    blockq = lay.qubits("r", "t", "s", "g", "ad", "da", "B")
    W, Wp = build_W(U, Kind.REAL_PART), build_W(U, Kind.IMAG_PART)
    circ = Circuit(lay)
    circ.add("h", cq)
    circ.compose(address_prep(n, N1), lay["ad"])
    circ.compose(W, sysq, controls=[cq], values=[0])
    circ.compose(Wp, sysq, controls=[cq], values=[1])
    circ.compose(Pu.circuit, blockq, controls=[cq], values=[0])
    circ.compose(Qu.circuit, blockq, controls=[cq], values=[1])
    circ.compose(W.adjoint(), sysq, controls=[cq], values=[0])
    circ.compose(Wp.adjoint(), sysq, controls=[cq], values=[1])
    circ.add("h", cq)
    return circ


def real_layout(n: int) -> Layout:
    return Layout([(f, 1) for f in REAL_FLAGS] + [("ad", n), ("da", n), ("B", 1)])


def build_real_circuit(c, P: PolynomialSpec, gamma: float, delta: float = 1e-9, N1: int | None = None,
                       U: Circuit | None = None) -> Circuit:
    """Three-flag circuit producing 1/(2 gamma sqrt(N1)) sum_k P(x_k) |k> for real P."""
    c, U = _oracle(c, U)
    n = c.n
    N1 = c.N if N1 is None else N1
    be = build_Gtilde(U, Kind.REAL_PART)
    blk = real_poly_block(be, P.scaled(1 / (2 * gamma)), delta, N=c.N, check=False, layout="full")
    lay = real_layout(n)
    sysq = lay.qubits("ad", "da", "B")
    W = build_W(U, Kind.REAL_PART)
    circ = Circuit(lay)
    circ.compose(address_prep(n, N1), lay["ad"])
    circ.compose(W, sysq)
    circ.compose(blk.circuit, lay.qubits("t", "s", "g", "ad", "da", "B"))
    circ.compose(W.adjoint(), sysq)
    return circ


def postselected_amplitudes(circ: Circuit, flags: tuple[str, ...]) -> tuple[np.ndarray, float]:
    """Unnormalized address amplitudes with all flags and the data/B registers at 0."""
    lay = circ.layout
    psi = np.zeros(2**circ.num_qubits, dtype=complex)
    psi[0] = 1.0
    out = simulate(psi, circ).reshape((2,) * circ.num_qubits)
    idx = [slice(None)] * circ.num_qubits
    for q in lay.qubits(*flags):
        idx[q] = 0
    good = out[tuple(idx)]  # axes: ad, da, B
    n = len(lay["ad"])
    good = good.reshape(2**n, -1)
    p_flags = float(np.vdot(good, good).real)
    return good[:, 0].copy(), p_flags


# ---------------------------------------------------------------------------
# amplification cost models
# ---------------------------------------------------------------------------

def _bbht_stages(p: float, lam: float = BBHT_LAMBDA, tail: float = 1e-15, max_stages: int = 10_000):
    theta = math.asin(math.sqrt(min(max(p, 0.0), 1.0)))
    m = 1.0
    for _ in range(max_stages):
        J = max(1, math.ceil(m - 1e-12))
        j = np.arange(J)
        succ = np.sin((2 * j + 1) * theta) ** 2
        yield J, float(succ.mean()), float((1 + 2 * j).mean()), succ
        m = lam * m


def bbht_expected_invocations(p: float, lam: float = BBHT_LAMBDA, tail: float = 1e-15) -> float:
    """Expected circuit invocations of the exponential-schedule amplification.

    A trial with j Grover iterations costs 1 + 2j invocations and succeeds
    with probability sin^2((2j+1) theta), sin^2 theta = p.
    """
    if p < P_FLOOR:
        raise UnamplifiableError(f"success probability {p:.3e} below floor {P_FLOOR}")
    survive, total = 1.0, 0.0
    for _, s, cost, _ in _bbht_stages(p, lam):
        total += survive * cost
        survive *= 1 - s
        if survive < tail:
            break
    return total


def bbht_simulate(p: float, rng: np.random.Generator, lam: float = BBHT_LAMBDA) -> tuple[int, int, int]:
    """One realized run: (invocations, Grover iterations, trials)."""
    if p < P_FLOOR:
        raise UnamplifiableError(f"success probability {p:.3e} below floor {P_FLOOR}")
    inv = its = trials = 0
    for J, _, _, succ in _bbht_stages(p, lam):
        j = int(rng.integers(J))
        inv += 1 + 2 * j
        its += j
        trials += 1
        if rng.random() < succ[j]:
            return inv, its, trials
    raise UnamplifiableError("amplification schedule did not terminate")


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

def _align(b: np.ndarray, target: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(target)))
    if abs(target[j]) == 0 or abs(b[j]) == 0:
        return b
    return b * np.exp(1j * (np.angle(target[j]) - np.angle(b[j])))


def _run(config: NtcaConfig, circ: Circuit, flags, scale: float, predicted: float) -> NtcaResult:
    cfg = config
    amps, _ = postselected_amplitudes(circ, flags)
    p = float(np.vdot(amps, amps).real)
    if p < P_FLOOR:
        raise UnamplifiableError(f"success probability {p:.3e} below floor {P_FLOOR}")
    N, N1 = cfg.N, cfg.N1
    x, y = cfg.c.x[:N], cfg.c.y[:N]
    target = np.zeros(len(amps), dtype=complex)
    target[:N1] = _target_values(cfg.P, x[:N1])
    if not cfg.Q.is_zero:
        target[:N1] += _target_values(cfg.Q, y[:N1])
    b_raw = scale * amps
    b = _align(b_raw, target)
    err = float(np.max(np.abs(b - target)))
    err_raw = float(np.max(np.abs(b_raw - target)))
    n = cfg.c.n
    out = QuantumState(amps / np.sqrt(p), Layout([("ad", n)]), check=False)
    tnorm = np.linalg.norm(target)
    fid = fidelity(out, QuantumState(target / tnorm, Layout([("ad", n)]), check=False)) if tnorm > 0 else 0.0
    per_inv = circ.query_count_U + circ.query_count_Udag
    rng = np.random.default_rng(cfg.seed)
    mode = cfg.amplification
    if mode is Amplification.NONE:
        inv, rounds, expected_inv = 1, 0, 1.0
    elif mode is Amplification.MEASURE_UNTIL_SUCCESS:
        rounds = int(rng.geometric(p))
        inv, expected_inv = rounds, 1.0 / p
    else:
        inv, rounds, _ = bbht_simulate(p, rng)
        expected_inv = bbht_expected_invocations(p)
    return NtcaResult(out, p, predicted, rounds, inv * per_inv, expected_inv * per_inv, per_inv,
                      b, b_raw, target, err, err_raw, cfg.epsilon / N, fid, len(flags), inv)


def run_ntca(config: NtcaConfig) -> NtcaResult:
    cfg = config
    cfg.validate()
    if cfg.variant is Variant.REAL_ONLY:
        return run_real_ntca(cfg)
    g = cfg.gamma
    circ = build_combiner_circuit(cfg.c, cfg.P, cfg.Q, g, cfg.delta, cfg.N1, cfg.oracle)
    xs, ys = cfg.c.x[: cfg.N1], cfg.c.y[: cfg.N1]
    predicted = float(np.sum(np.abs(cfg.P(xs) + cfg.Q(ys)) ** 2) / (64 * g * g * cfg.N1))
    return _run(cfg, circ, FULL_FLAGS, 8 * g * math.sqrt(cfg.N1), predicted)


def run_partial_ntca(config: NtcaConfig, N1: int | None = None) -> NtcaResult:
    cfg = config
    if N1 is not None:
        cfg = NtcaConfig(cfg.c, cfg.P, cfg.Q, cfg.gamma, cfg.epsilon, Variant.PARTIAL, N1,
                         cfg.amplification, cfg.seed, cfg.check_budget, cfg.oracle)
    return run_ntca(cfg)


def run_real_ntca(config: NtcaConfig) -> NtcaResult:
    cfg = config
    cfg.validate()
    if not cfg.P.is_real or not cfg.Q.is_zero:
        raise ConfigError("the three-flag variant needs a real P and no Q")
    g = cfg.gamma
    circ = build_real_circuit(cfg.c, cfg.P, g, cfg.delta, cfg.N1, cfg.oracle)
    xs = cfg.c.x[: cfg.N1]
    predicted = float(np.sum(np.abs(cfg.P(xs)) ** 2) / (4 * g * g * cfg.N1))
    return _run(cfg, circ, REAL_FLAGS, 2 * g * math.sqrt(cfg.N1), predicted)


# ---------------------------------------------------------------------------
# error ledger
# ---------------------------------------------------------------------------

@dataclass
class LedgerTerm:
    name: str
    measured: float
    budget: float

    @property
    def ok(self) -> bool:
        return self.measured <= self.budget

    def to_json(self) -> dict:
        return {"name": self.name, "measured": self.measured, "budget": self.budget, "ok": self.ok}


@dataclass
class ErrorLedger:
    terms: list[LedgerTerm]

    @property
    def ok(self) -> bool:
        return all(t.ok for t in self.terms)

    def __getitem__(self, name: str) -> LedgerTerm:
        for t in self.terms:
            if t.name == name:
                return t
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"ok": self.ok, "terms": [t.to_json() for t in self.terms]}


def realized_eigen_response(block: QsvtCircuit, c: AmplitudeVector, kind=Kind.REAL_PART,
                            U: Circuit | None = None) -> np.ndarray:
    """<0..0, W k 0| block |0..0, W k 0> for every k: the polynomial the circuit actually applies."""
    _, U = _oracle(c, U)
    W = build_W(U, kind)
    n = c.n
    sys_dim = 2 ** W.num_qubits
    starts = np.zeros((sys_dim, c.N), dtype=complex)
    for k in range(c.N):
        starts[k * 2 ** (n + 1), k] = 1.0
    eig = simulate(starts, W, batch=True)
    full = np.zeros((2**block.circuit.num_qubits, c.N), dtype=complex)
    full[:sys_dim] = eig
    out = simulate(full, block.circuit, batch=True)[:sys_dim]
    return np.einsum("ik,ik->k", eig.conj(), out)


def error_ledger(config: NtcaConfig, result: NtcaResult | None = None) -> ErrorLedger:
    """Measured size of each triangle-inequality term next to its share of epsilon."""
    cfg = config
    N, eps, g = cfg.N, cfg.epsilon, cfg.gamma
    degrees = shared_degrees(cfg.P.scaled(1 / (4 * g)), cfg.Q.scaled(1 / (4 * g)))
    terms = []
    for name, poly, kind, coords in (("P", cfg.P, Kind.REAL_PART, cfg.c.x[:N]),
                                     ("Q", cfg.Q, Kind.IMAG_PART, cfg.c.y[:N])):
        blk = build_P_unitary(cfg.c, poly, g, cfg.delta, kind, degrees, cfg.oracle)
        realized = realized_eigen_response(blk, cfg.c, kind, cfg.oracle)
        target = _target_values(poly, coords) if not poly.is_zero else np.zeros(N, dtype=complex)
        approx = float(np.max(np.abs(poly(coords) - target)))
        terms.append(LedgerTerm(f"approx_{name}", max(approx, poly.certified_error), eps / (4 * N)))
        qsvt = 4 * g * float(np.max(np.abs(poly(coords) / (4 * g) - realized)))
        terms.append(LedgerTerm(f"qsvt_{name}", qsvt, 4 * g * cfg.delta))
        part = float(np.max(np.abs(target - 4 * g * realized)))
        terms.append(LedgerTerm(f"part_{name}", part, eps / (2 * N)))
    if result is None:
        result = run_ntca(cfg)
    terms.append(LedgerTerm("combined", result.per_point_error, eps / N))
    return ErrorLedger(terms)


__all__ = [
    "Amplification", "C0", "ErrorLedger", "LedgerTerm", "NtcaConfig", "NtcaResult", "Variant",
    "address_prep", "bbht_expected_invocations", "bbht_simulate", "build_P_unitary", "build_Q_unitary",
    "build_combiner_circuit", "build_real_circuit", "error_ledger", "postselected_amplitudes",
    "realized_eigen_response", "run_ntca", "run_partial_ntca", "run_real_ntca", "shared_degrees",
]
