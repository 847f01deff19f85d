"""Block-encoding of amplitudes.

From a state-preparation oracle U on n data qubits this builds

* W: |k>_ad |0>_da,B -> |k>/2 ((sum_j c_j|j> + |k>)|0> + (sum_j c_j|j> - |k>)|1>)
* G = W S0 W^dag Z_B with S0 = I - 2|0><0| on data+B
* G~: one extra qubit g, top-left block -(G + G^dag)/2, eigenvalues x_k

and the primed variants (an S gate on B inside W) whose eigenvalues are y_k.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BlockEncodingError, CircuitError
from .statevector import DEFAULT_DENSE_CAP, Circuit, Layout, QuantumState, dense_unitary, simulate


class Kind(str, Enum):
    REAL_PART = "real"
    IMAG_PART = "imag"

    @classmethod
    def parse(cls, v) -> "Kind":
        if isinstance(v, Kind):
            return v
        v = str(v).lower()
        return cls.IMAG_PART if v in ("imag", "imag_part", "im") else cls.REAL_PART


@dataclass
class BlockEncoding:
    """``circuit`` acts on ``a`` ancillas (the most significant qubits) plus the system.

    ``alpha * <0|^a circuit |0>^a`` approximates the encoded matrix within ``epsilon``.
    """

    circuit: Circuit
    alpha: float = 1.0
    a: int = 1
    epsilon: float = 0.0

    @property
    def system_width(self) -> int:
        return self.circuit.num_qubits - self.a

    @property
    def ancillas(self) -> list[int]:
        return list(range(self.a))

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "a": self.a, "epsilon": self.epsilon,
                "circuit": self.circuit.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> "BlockEncoding":
        if "circuit" not in d:
            return cls(Circuit.from_json(d), 1.0, 1, 0.0)
        return cls(Circuit.from_json(d["circuit"]), d.get("alpha", 1.0), d.get("a", 1), d.get("epsilon", 0.0))


@dataclass(frozen=True)
class AmplitudeSpectrum:
    values: np.ndarray
    kind: Kind

    def contains(self, targets, tol: float = 1e-9) -> bool:
        return multiset_contains(self.values, targets, tol)


def multiset_contains(values, targets, tol: float = 1e-9) -> bool:
    """Greedy multiset inclusion of real ``targets`` in ``values`` within ``tol``."""
    pool = sorted(np.real(values))
    for t in sorted(np.real(targets)):
        j = int(np.argmin([abs(p - t) for p in pool])) if pool else -1
        if j < 0 or abs(pool[j] - t) > tol:
            return False
        pool.pop(j)
    return True


def amplitude_layout(n: int) -> Layout:
    return Layout([("ad", n), ("da", n), ("B", 1)])


def _check_oracle(U: Circuit) -> int:
    if U.num_qubits < 1:
        raise CircuitError("oracle must act on at least one qubit")
    return U.num_qubits


def build_W(U: Circuit, kind=Kind.REAL_PART) -> Circuit:
    kind = Kind.parse(kind)
    n = _check_oracle(U)
    lay = amplitude_layout(n)
    ad, da, (b,) = lay["ad"], lay["da"], lay["B"]
    W = Circuit(lay)
    W.compose(U, da)
    W.add("h", b)
    if kind is Kind.IMAG_PART:
        W.add("s", b)
    # B=1 branch returns the data register to |0>
    W.compose(U.adjoint(), da, controls=[b])
    # ... and the Toffoli layer copies the address into it
    for a_q, d_q in zip(ad, da):
        W.add("x", d_q, controls=[a_q, b])
    W.add("h", b)
    return W


def reflection_S0(layout: Layout) -> Circuit:
    """I - 2|0><0| on the data and B registers."""
    S0 = Circuit(layout)
    (b,) = layout["B"]
    S0.add("x", b)
    S0.add("z", b, controls=layout["da"], values=0)
    S0.add("x", b)
    return S0


def build_G(U: Circuit, kind=Kind.REAL_PART) -> Circuit:
    """G = W S0 W^dag Z_B (rightmost factor applied first)."""
    W = build_W(U, kind)
    lay = W.layout
    G = Circuit(lay)
    G.add("z", lay["B"][0])
    G.compose(W.adjoint())
    G.compose(reflection_S0(lay))
    G.compose(W)
    return G


def gtilde_layout(n: int) -> Layout:
    return Layout([("g", 1), ("ad", n), ("da", n), ("B", 1)])


def build_Gtilde(U: Circuit, kind=Kind.REAL_PART) -> BlockEncoding:
    """(1, 1, 0)-block-encoding of -(G + G^dag)/2.

    Controlled-G on g=0 and controlled-G^dag on g=1 share the reflection
    R = W S0 W^dag, since G = R Z_B and G^dag = Z_B R. Only the two Z_B gates
    are controlled, so the oracle is used four times in total. The closing
    Rz(2 pi) on g is exactly -I and supplies the overall sign.
    """
    kind = Kind.parse(kind)
    n = _check_oracle(U)
    W = build_W(U, kind)
    lay = gtilde_layout(n)
    sysq = lay.qubits("ad", "da", "B")
    (g,), (b,) = lay["g"], lay["B"]
    R = Circuit(W.layout)
    R.compose(W.adjoint())
    R.compose(reflection_S0(W.layout))
    R.compose(W)
    Gt = Circuit(lay)
    Gt.add("h", g)
    Gt.add("z", b, controls=[g], values=0)
    Gt.compose(R, sysq)
    Gt.add("z", b, controls=[g], values=1)
    Gt.add("h", g)
    Gt.add("rz", g, 2 * np.pi)
    return BlockEncoding(Gt, 1.0, 1, 0.0)


def extract_block(be: BlockEncoding, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """alpha * (<0|^a x I) U (|0>^a x I), computed column by column on the system space."""
    if be.circuit.num_qubits > cap:
        from .errors import DenseCapError

        raise DenseCapError(f"{be.circuit.num_qubits} qubits exceeds dense cap {cap}")
    s = be.system_width
    cols = np.zeros((2**be.circuit.num_qubits, 2**s), dtype=complex)
    cols[: 2**s, :] = np.eye(2**s)
    out = simulate(cols, be.circuit, batch=True)
    return be.alpha * out[: 2**s, :]


def amplitude_spectrum(U: Circuit, kind=Kind.REAL_PART, cap: int = DEFAULT_DENSE_CAP) -> AmplitudeSpectrum:
    block = extract_block(build_Gtilde(U, kind), cap)
    herm = np.abs(block - block.conj().T).max()
    if herm > 1e-9:
        raise BlockEncodingError(f"extracted block is not Hermitian (residual {herm:.2e})")
    return AmplitudeSpectrum(np.linalg.eigvalsh((block + block.conj().T) / 2), Kind.parse(kind))


def eigenstate_for_k(U: Circuit, k: int, kind=Kind.REAL_PART, N: int | None = None) -> QuantumState:
    """W|k>_ad|0>_da,B for 1-based k: an eigenvector of -(G+G^dag)/2 with eigenvalue x_k (or y_k)."""
    n = _check_oracle(U)
    N = 2**n if N is None else N
    if not 1 <= k <= N:
        raise CircuitError(f"k={k} outside 1..{N}")
    W = build_W(U, kind)
    start = QuantumState.from_registers(W.layout, {"ad": k - 1})
    return QuantumState(simulate(start.amplitudes, W), W.layout, check=False)


def invariant_pair(c: np.ndarray, k: int, kind=Kind.REAL_PART) -> tuple[np.ndarray, np.ndarray]:
    """Classical |k>|Psi_k0>, |k>|Psi_k1> on the (ad, da, B) space for 1-based k."""
    kind = Kind.parse(kind)
    c = np.asarray(c, dtype=complex)
    dim = len(c)
    ek = np.zeros(dim, dtype=complex)
    ek[k - 1] = 1.0
    shift = 1.0 if kind is Kind.REAL_PART else 1j
    plus, minus = c + shift * ek, c - shift * ek
    ad = ek
    v0 = np.kron(ad, np.kron(plus / np.linalg.norm(plus), [1, 0]))
    v1 = np.kron(ad, np.kron(minus / np.linalg.norm(minus), [0, 1]))
    return v0, v1


__all__ = [
    "AmplitudeSpectrum", "BlockEncoding", "Kind", "amplitude_spectrum", "build_G", "build_Gtilde",
    "build_W", "dense_unitary", "eigenstate_for_k", "extract_block", "invariant_pair",
    "multiset_contains", "reflection_S0",
]
