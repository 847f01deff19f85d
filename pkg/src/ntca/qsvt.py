"""Polynomial eigenvalue transformations of block-encoded Hermitian matrices.

Every construction here interleaves calls to a block-encoding U (odd calls)
and U^dag (even calls) with projector-controlled phases on one signal qubit
s. The s qubit runs the phase sequence with both signs at once, so the block
on s=0 is the real part of the QSP polynomial. Arbitrary parity and complex
coefficients are handled by a small linear-combination register in front of
s: qubit t picks the parity piece and qubit r picks real or imaginary part.
All pieces share their oracle calls; only the final call is controlled by t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .block_encoding import BlockEncoding, extract_block
from .errors import BlockEncodingError, CircuitError, PolynomialError
from .poly import EVEN, MIXED, ODD, PolynomialSpec, sup_norm
from .qsp import PhaseFactors, compute_phase_factors
from .statevector import Circuit, Layout

HERMITIAN_TOL = 1e-9
HERMITIAN_CHECK_WIDTH = 12
SUP_SLACK = 1e-12


def transform_error_bound(d: int, eps: float, alpha: float, delta: float, N: int) -> float:
    """Block error of a degree-d transformation: 4 d sqrt(eps/alpha) + N delta."""
    return 4 * d * np.sqrt(max(eps, 0.0) / alpha) + N * delta


@dataclass
class QsvtCircuit:
    circuit: Circuit
    ancillas: int
    polynomial: PolynomialSpec
    error_bound: float
    phases: list = field(default_factory=list)
    calls: int = 0

    @property
    def degree(self) -> int:
        return self.calls

    def as_block_encoding(self) -> BlockEncoding:
        return BlockEncoding(self.circuit, 1.0, self.ancillas, self.error_bound)

    def block(self, cap: int | None = None) -> np.ndarray:
        return extract_block(self.as_block_encoding(), *(() if cap is None else (cap,)))

    def to_json(self) -> dict:
        return {"ancillas": self.ancillas, "calls": self.calls, "error_bound": self.error_bound,
                "polynomial": self.polynomial.to_json(),
                "phases": [p.to_json() if p is not None else None for p in self.phases],
                "circuit": self.circuit.to_json()}


def reference_matrix_function(A: np.ndarray, p) -> np.ndarray:
    """V p(Lambda) V^dag from a dense eigendecomposition of Hermitian A."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise BlockEncodingError("reference function needs a square matrix")
    res = np.abs(A - A.conj().T).max() if A.size else 0.0
    if res > HERMITIAN_TOL:
        raise BlockEncodingError(f"matrix is not Hermitian (residual {res:.2e})")
    lam, V = np.linalg.eigh((A + A.conj().T) / 2)
    return (V * np.asarray(p(lam), dtype=complex)) @ V.conj().T


def check_hermitian(be: BlockEncoding) -> float:
    """Hermiticity residual of the encoded block; skipped (returns 0) above the dense width."""
    if be.circuit.num_qubits > HERMITIAN_CHECK_WIDTH:
        return 0.0
    B = extract_block(be)
    res = float(np.abs(B - B.conj().T).max())
    if res > HERMITIAN_TOL:
        raise BlockEncodingError(f"block is not Hermitian (residual {res:.2e})")
    return res


# ---------------------------------------------------------------------------
# core sequence
# ---------------------------------------------------------------------------

@dataclass
class _Branch:
    bits: tuple          # values of the combination register
    degree: int
    phi: np.ndarray      # reflection-convention phases, length = degree
    kappa: complex


def _branch_from(pf: PhaseFactors | None, bits, degree: int) -> _Branch:
    if pf is None:
        # zero piece: trivial phases, weights -i/+i cancel the two signal branches
        return _Branch(tuple(bits), degree, np.zeros(degree), 1j)
    phi, kappa = pf.reflection()
    return _Branch(tuple(bits), degree, phi, kappa)


def _projector_phase(circ: Circuit, s: int, phi: float, proj, ctrl_q, ctrl_v):
    """exp(i (-1)^s phi (2 Pi - I)) with Pi = |proj values><proj values| on proj qubits."""
    if phi == 0.0:
        return
    pq, pv = proj
    circ.add("rz", s, 2 * phi, controls=list(ctrl_q), values=list(ctrl_v))
    circ.add("rz", s, -4 * phi, controls=list(ctrl_q) + list(pq), values=list(ctrl_v) + list(pv))


def _sequence(U: Circuit, lcu: list[str], branches: list[_Branch], proj_in, proj_out,
              t_name: str | None = None, i_name: str | None = None) -> tuple[Circuit, Layout]:
    """Layout [lcu...][s][U registers]; ``i_name`` weights its 1-branch by i."""
    sname = "s"
    while sname in U.layout:
        sname += "'"
    regs = [(n, 1) for n in lcu] + [(sname, 1)] + list(U.layout.registers)
    lay = Layout(regs)
    off = len(lcu) + 1
    s = len(lcu)
    uq = list(range(off, off + U.num_qubits))
    shift = lambda qs: [q + off for q in qs]  # noqa: E731
    pin = (shift(proj_in[0]), list(proj_in[1]))
    pout = (shift(proj_out[0]), list(proj_out[1]))
    lq = list(range(len(lcu)))
    circ = Circuit(lay)
    for q in lq:
        circ.add("h", q)
    circ.add("h", s)
    if i_name is not None:
        circ.add("s", lcu.index(i_name))
    for br in branches:
        ang = float(np.angle(br.kappa))
        if abs(ang) > 1e-15:
            circ.add("rz", s, 2 * ang, controls=lq, values=list(br.bits))
    dmin = min(b.degree for b in branches)
    dmax = max(b.degree for b in branches)
    Uadj = U.adjoint()
    for j in range(1, dmax + 1):
        call = U if j % 2 else Uadj
        active = [b for b in branches if b.degree >= j]
        if j <= dmin:
            circ.compose(call, uq)
        else:
            if t_name is None:
                raise CircuitError("branch degrees differ but no parity qubit is available")
            t = lcu.index(t_name)
            vals = {b.bits[t] for b in active}
            others = {b.bits[t] for b in branches if b.degree < j}
            if len(vals) != 1 or vals & others:
                raise CircuitError("branch degrees are not separated by the parity qubit")
            circ.compose(call, uq, controls=[t], values=[vals.pop()])
        proj = pout if j % 2 else pin
        angles = [b.phi[b.degree - j] for b in active]
        if len(active) == len(branches) and np.allclose(angles, angles[0], atol=0, rtol=0):
            _projector_phase(circ, s, angles[0], proj, [], [])
        else:
            for b, a in zip(active, angles):
                _projector_phase(circ, s, a, proj, lq, b.bits)
    circ.add("h", s)
    for q in lq:
        circ.add("h", q)
    return circ, lay


def _ancilla_projector(be: BlockEncoding):
    return (list(range(be.a)), [0] * be.a)


def _phases(p: PolynomialSpec, degree: int | None, tol: float, seed: int) -> PhaseFactors | None:
    if p.is_zero:
        return None
    return compute_phase_factors(p, tol=tol, degree=degree, seed=seed)


def assemble_qsvt(be: BlockEncoding, phases: PhaseFactors | PolynomialSpec, tol: float = 1e-9,
                  N: int | None = None, check: bool = True, seed: int = 0) -> QsvtCircuit:
    """Block = p(A/alpha) for a real definite-parity p with |p| <= 1; ancillas a + 1."""
    if check:
        check_hermitian(be)
    if isinstance(phases, PolynomialSpec):
        poly = phases
        pf = compute_phase_factors(poly, tol=tol, seed=seed)
    else:
        pf = phases
        poly = PolynomialSpec.from_chebyshev(_realized_cheb(pf), label=pf.target)
    br = _branch_from(pf, (), pf.degree)
    proj = _ancilla_projector(be)
    circ, _ = _sequence(be.circuit, [], [br], proj, proj)
    N = 2**be.system_width if N is None else N
    bound = transform_error_bound(pf.degree, be.epsilon, be.alpha, tol, N)
    return QsvtCircuit(circ, be.a + 1, poly, bound, [pf], pf.degree)


def _realized_cheb(pf: PhaseFactors) -> np.ndarray:
    from numpy.polynomial import chebyshev as C

    d = pf.degree
    x = C.chebpts1(d + 1)
    return C.chebfit(x, pf.evaluate(x), d)


def _split(p: PolynomialSpec):
    """(Re-even, Re-odd, Im-even, Im-odd) pieces."""
    out = []
    for part in (p.cheb.real, p.cheb.imag):
        even = part.copy()
        even[1::2] = 0
        odd = part.copy()
        odd[0::2] = 0
        out += [PolynomialSpec(even), PolynomialSpec(odd)]
    return out


def _degrees(pieces: list[PolynomialSpec], parities: list[str]) -> tuple[int, int]:
    de = max([p.degree for p, par in zip(pieces, parities) if par == EVEN and not p.is_zero], default=None)
    do = max([p.degree for p, par in zip(pieces, parities) if par == ODD and not p.is_zero], default=None)
    if de is None and do is None:
        return 0, 1
    if de is None:
        de = do - 1
    if do is None:
        do = de - 1 if de >= 1 else 1
    if do > de + 1:
        de = do - 1
    elif de > do + 1:
        do = de - 1
    return de, do


def _combine(be: BlockEncoding, pieces: dict, lcu: list[str], r_phase: bool, tol: float,
             N: int | None, seed: int, degrees: tuple[int, int] | None, target: PolynomialSpec) -> QsvtCircuit:
    """pieces maps combination bits -> (real definite-parity poly, parity)."""
    scale = 2 ** len(lcu)
    parities = [par for (_, par) in pieces.values()]
    polys = [p for (p, _) in pieces.values()]
    de, do = degrees if degrees is not None else _degrees(polys, parities)
    branches, pfs = [], []
    for bits, (p, par) in pieces.items():
        q = p.scaled(scale, label=p.label)
        if sup_norm(q) > 1 + SUP_SLACK:
            raise PolynomialError(f"piece {bits} exceeds the admissible bound after scaling")
        deg = de if par == EVEN else do
        pf = _phases(q, deg, tol, seed)
        pfs.append(pf)
        branches.append(_branch_from(pf, bits, deg))
    proj = _ancilla_projector(be)
    circ, _ = _sequence(be.circuit, lcu, branches, proj, proj, t_name="t" if "t" in lcu else None,
                        i_name="r" if r_phase else None)
    dmax = max(b.degree for b in branches)
    N = 2**be.system_width if N is None else N
    bound = transform_error_bound(dmax, be.epsilon, be.alpha, tol, N)
    return QsvtCircuit(circ, be.a + 1 + len(lcu), target, bound, pfs, dmax)


def real_poly_block(be: BlockEncoding, p: PolynomialSpec, tol: float = 1e-9, N: int | None = None,
                    check: bool = True, seed: int = 0, layout: str = "compact") -> QsvtCircuit:
    """Block = p(A/alpha) for real p with |p| <= 1/2."""
    if not p.is_real:
        raise PolynomialError("real_poly_block needs a real polynomial")
    if sup_norm(p) > 0.5 + SUP_SLACK:
        raise PolynomialError("real_poly_block needs |p| <= 1/2")
    if check:
        check_hermitian(be)
    re_e, re_o, _, _ = _split(p)
    if layout == "compact" and p.parity != MIXED and not p.is_zero:
        return assemble_qsvt(be, p, tol, N, check=False, seed=seed)
    return _combine(be, {(0,): (re_e, EVEN), (1,): (re_o, ODD)}, ["t"], False, tol, N, seed, None, p)


def complex_poly_block(be: BlockEncoding, p: PolynomialSpec, delta: float = 1e-9, N: int | None = None,
                       check: bool = True, seed: int = 0, layout: str = "compact",
                       degrees: tuple[int, int] | None = None) -> QsvtCircuit:
    """Block = p(A/alpha) for complex p with |p| <= 1/4.

    ``layout="full"`` always uses both combination qubits (r, t), giving a + 3
    ancillas regardless of which pieces vanish; ``degrees`` pins the (even, odd)
    call counts so that several blocks can share one schedule.
    """
    # |p| <= 1/4 implies this; the construction itself only needs each piece bounded
    if max(sup_norm(q) for q in _split(p)) > 0.25 + SUP_SLACK:
        raise PolynomialError("complex_poly_block needs |p| <= 1/4 (each real/imag parity piece)")
    if check:
        check_hermitian(be)
    re_e, re_o, im_e, im_o = _split(p)
    if layout == "full":
        pieces = {(0, 0): (re_e, EVEN), (0, 1): (re_o, ODD), (1, 0): (im_e, EVEN), (1, 1): (im_o, ODD)}
        return _combine(be, pieces, ["r", "t"], True, delta, N, seed, degrees, p)
    if layout != "compact":
        raise CircuitError(f"unknown layout {layout!r}")
    if p.is_real and p.parity != MIXED and not p.is_zero:
        return assemble_qsvt(be, p, delta, N, check=False, seed=seed)
    if not p.is_real and not np.any(p.cheb.real) and p.parity != MIXED:
        # purely imaginary with definite parity: one branch and a global factor i
        out = assemble_qsvt(be, p.imag_part(), delta, N, check=False, seed=seed)
        out.circuit.add("gphase", 0, np.pi / 2)
        out.polynomial = p
        return out
    if p.is_real:
        return _combine(be, {(0,): (re_e, EVEN), (1,): (re_o, ODD)}, ["t"], False, delta, N, seed, degrees, p)
    pieces = {(0, 0): (re_e, EVEN), (0, 1): (re_o, ODD), (1, 0): (im_e, EVEN), (1, 1): (im_o, ODD)}
    return _combine(be, pieces, ["r", "t"], True, delta, N, seed, degrees, p)


def singular_value_qsvt(U: Circuit, p: PolynomialSpec, proj_in, proj_out, tol: float = 1e-9,
                        seed: int = 0) -> tuple[Circuit, PhaseFactors]:
    """Odd real p applied to the singular values of Pi_out U Pi_in.

    Projectors are (qubits, values) pairs on U's qubits. The result has layout
    [s][U registers]; its (s=0, proj_out | s=0, proj_in) block is p^(SV).
    """
    if p.parity != ODD or not p.is_real:
        raise PolynomialError("singular value transformation here needs a real odd polynomial")
    pf = compute_phase_factors(p, tol=tol, seed=seed)
    circ, _ = _sequence(U, [], [_branch_from(pf, (), pf.degree)], proj_in, proj_out)
    return circ, pf


__all__ = [
    "QsvtCircuit", "assemble_qsvt", "complex_poly_block", "transform_error_bound", "real_poly_block",
    "reference_matrix_function", "singular_value_qsvt",
]
