"""Dense statevector simulation.

Qubit 0 is the most significant bit of a basis label. Registers are laid out
most-significant first in the order

    extra ancillas, combiner, QSVT ancillas, block-encoding ancilla,
    address ("ad"), data ("da"), flag ("B")

and every builder in this package addresses qubits through register names so
the wiring cannot silently drift.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CircuitError, DenseCapError, ProjectionError

DEFAULT_DENSE_CAP = 14
NORM_FLOOR = 1e-300

_SQ2 = 1.0 / np.sqrt(2.0)
_FIXED = {
    "h": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "s": np.array([[1, 0], [0, 1j]], dtype=complex),
    "sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
}
_ADJOINT_KIND = {"h": "h", "x": "x", "z": "z", "s": "sdg", "sdg": "s"}
PARAMETRIC = ("rz", "ry", "gphase")
KINDS = tuple(_FIXED) + PARAMETRIC + ("unitary",)


def gate_matrix(kind: str, params: Sequence[float] = (), matrix=None) -> np.ndarray:
    """Matrix of an uncontrolled gate. ``gphase`` is ``e^{i theta} I``."""
    if kind in _FIXED:
        return _FIXED[kind]
    if kind == "rz":
        t = params[0]
        return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])
    if kind == "ry":
        t = params[0]
        c, s = np.cos(t / 2), np.sin(t / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "gphase":
        return np.exp(1j * params[0]) * np.eye(2, dtype=complex)
    if kind == "unitary":
        return np.asarray(matrix, dtype=complex)
    raise CircuitError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()
    controls: tuple[int, ...] = ()
    control_values: tuple[int, ...] = ()
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)
    # name of the oracle this gate was inherited from, "" for plain gates
    tag: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        if len(self.control_values) != len(self.controls):
            raise CircuitError("control_values must match controls")
        span = self.targets + self.controls
        if len(set(span)) != len(span):
            raise CircuitError(f"overlapping target/control qubits in {self.kind}: {span}")
        if self.kind != "unitary" and len(self.targets) != 1:
            raise CircuitError(f"{self.kind} acts on one qubit")
        if self.kind == "unitary":
            m = np.asarray(self.matrix)
            if m.shape != (2 ** len(self.targets),) * 2:
                raise CircuitError("unitary matrix shape does not match targets")

    def dense(self) -> np.ndarray:
        return gate_matrix(self.kind, self.params, self.matrix)

    def adjoint(self) -> "Gate":
        if self.kind in _ADJOINT_KIND:
            kind, params, mat = _ADJOINT_KIND[self.kind], self.params, None
        elif self.kind in PARAMETRIC:
            kind, params, mat = self.kind, (-self.params[0],), None
        else:
            kind, params, mat = "unitary", (), np.asarray(self.matrix).conj().T
        return Gate(kind, self.targets, params, self.controls, self.control_values, mat, self.tag)

    def remap(self, qmap: Sequence[int], controls=(), values=()) -> "Gate":
        return Gate(
            self.kind,
            tuple(qmap[q] for q in self.targets),
            self.params,
            tuple(controls) + tuple(qmap[q] for q in self.controls),
            tuple(values) + self.control_values,
            self.matrix,
            self.tag,
        )

    def to_json(self) -> dict:
        out = {"kind": self.kind, "targets": list(self.targets)}
        if self.params:
            out["params"] = [float(p) for p in self.params]
        if self.controls:
            out["controls"] = list(self.controls)
            out["control_values"] = list(self.control_values)
        if self.tag:
            out["tag"] = self.tag
        if self.kind == "unitary":
            m = np.asarray(self.matrix)
            out["matrix"] = [[[float(z.real), float(z.imag)] for z in row] for row in m]
        return out

    @classmethod
    def from_json(cls, d: dict) -> "Gate":
        mat = None
        if d["kind"] == "unitary":
            mat = np.array([[complex(re, im) for re, im in row] for row in d["matrix"]])
        return cls(
            d["kind"],
            tuple(d["targets"]),
            tuple(d.get("params", ())),
            tuple(d.get("controls", ())),
            tuple(d.get("control_values", ())),
            mat,
            d.get("tag", ""),
        )


class Layout:
    """Ordered named registers, most significant first."""

    def __init__(self, registers: Iterable[tuple[str, int]]):
        self.registers = tuple((str(n), int(w)) for n, w in registers)
        names = [n for n, _ in self.registers]
        if len(set(names)) != len(names):
            raise CircuitError(f"duplicate register names in {names}")
        if any(w < 0 for _, w in self.registers):
            raise CircuitError("register widths must be nonnegative")
        self._slices = {}
        pos = 0
        for n, w in self.registers:
            self._slices[n] = list(range(pos, pos + w))
            pos += w
        self.width = pos

    def __getitem__(self, name: str) -> list[int]:
        try:
            return self._slices[name]
        except KeyError:
            raise CircuitError(f"no register named {name!r}") from None

    def __contains__(self, name):
        return name in self._slices

    def __eq__(self, other):
        return isinstance(other, Layout) and self.registers == other.registers

    def __repr__(self):
        return f"Layout({list(self.registers)})"

    def qubits(self, *names: str) -> list[int]:
        return [q for n in names for q in self[n]]

    def without(self, qubits: Iterable[int]) -> "Layout":
        drop = set(qubits)
        regs = []
        for n, w in self.registers:
            keep = sum(1 for q in self[n] if q not in drop)
            if keep:
                regs.append((n, keep))
        return Layout(regs)

    @classmethod
    def flat(cls, m: int, name: str = "q") -> "Layout":
        return cls([(name, m)])

    def to_json(self) -> list[dict]:
        return [{"name": n, "width": w} for n, w in self.registers]


class QuantumState:
    """Normalized amplitude vector over a register layout."""

    def __init__(self, amplitudes, layout: Layout | int | None = None, *, check: bool = True):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        m = int(round(np.log2(len(amps)))) if len(amps) else -1
        if m < 0 or 2**m != len(amps):
            raise CircuitError("state length must be a power of two")
        if layout is None or isinstance(layout, (int, np.integer)):
            layout = Layout.flat(m if layout is None else int(layout))
        self.layout = layout
        if self.layout.width != m:
            raise CircuitError(f"layout width {self.layout.width} != {m} qubits")
        if check and abs(np.vdot(amps, amps).real - 1.0) > 1e-10:
            raise CircuitError("state is not normalized")
        self.amplitudes = amps
        self.amplitudes.flags.writeable = False

    @property
    def num_qubits(self) -> int:
        return self.layout.width

    @classmethod
    def zero(cls, layout: Layout | int) -> "QuantumState":
        layout = Layout.flat(layout) if isinstance(layout, int) else layout
        amps = np.zeros(2**layout.width, dtype=complex)
        amps[0] = 1.0
        return cls(amps, layout)

    @classmethod
    def basis(cls, label: int | str, layout: Layout | int) -> "QuantumState":
        layout = Layout.flat(layout) if isinstance(layout, int) else layout
        idx = int(label, 2) if isinstance(label, str) else int(label)
        amps = np.zeros(2**layout.width, dtype=complex)
        amps[idx] = 1.0
        return cls(amps, layout)

    @classmethod
    def from_registers(cls, layout: Layout, values: dict[str, int]) -> "QuantumState":
        """Basis state with each named register holding an integer value."""
        label = 0
        for name, w in layout.registers:
            v = int(values.get(name, 0))
            if not 0 <= v < 2**w:
                raise CircuitError(f"value {v} does not fit register {name}")
            label = (label << w) | v
        return cls.basis(label, layout)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def to_json(self) -> dict:
        return {
            "registers": self.layout.to_json(),
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_json(cls, d: dict) -> "QuantumState":
        layout = Layout((r["name"], r["width"]) for r in d["registers"])
        amps = np.array([complex(re, im) for re, im in d["amplitudes"]])
        return cls(amps, layout)


def _dag(name: str) -> str:
    return name[:-4] if name.endswith("^dag") else name + "^dag"


class Circuit:
    """Ordered gate list plus oracle-query counters.

    ``queries`` maps an oracle name (``"U"``) or its adjoint (``"U^dag"``) to
    the number of times it is applied, controlled or not.
    """

    def __init__(self, num_qubits: int | Layout, gates: Iterable[Gate] = (), queries=None):
        if isinstance(num_qubits, Layout):
            self.layout = num_qubits
        else:
            self.layout = Layout.flat(int(num_qubits))
        self.num_qubits = self.layout.width
        self.gates: list[Gate] = []
        self.queries: Counter = Counter(queries or {})
        for g in gates:
            self.append(g)

    # construction -------------------------------------------------------
    def append(self, gate: Gate) -> "Circuit":
        for q in gate.targets + gate.controls:
            if not 0 <= q < self.num_qubits:
                raise CircuitError(f"qubit {q} out of range for {self.num_qubits}-qubit circuit")
        self.gates.append(gate)
        return self

    def add(self, kind, targets, params=(), controls=(), values=None, matrix=None, tag=""):
        targets = (targets,) if isinstance(targets, (int, np.integer)) else tuple(targets)
        controls = (controls,) if isinstance(controls, (int, np.integer)) else tuple(controls)
        if values is None:
            values = (1,) * len(controls)
        elif isinstance(values, (int, np.integer)):
            values = (int(values),) * len(controls)
        params = (params,) if np.isscalar(params) else tuple(params)
        return self.append(
            Gate(kind, tuple(int(t) for t in targets), tuple(float(p) for p in params),
                 tuple(int(c) for c in controls), tuple(int(v) for v in values), matrix, tag)
        )

    def compose(self, other: "Circuit", qubits: Sequence[int] | None = None,
                controls: Sequence[int] = (), values: Sequence[int] | int | None = None) -> "Circuit":
        """Append ``other`` mapped onto ``qubits``, optionally under extra controls."""
        qubits = list(range(other.num_qubits)) if qubits is None else list(qubits)
        if len(qubits) != other.num_qubits:
            raise CircuitError(f"need {other.num_qubits} qubits, got {len(qubits)}")
        controls = list(controls)
        if values is None:
            values = [1] * len(controls)
        elif isinstance(values, (int, np.integer)):
            values = [int(values)] * len(controls)
        if set(controls) & set(qubits):
            raise CircuitError("control qubits overlap the composed circuit")
        for g in other.gates:
            self.append(g.remap(qubits, controls, values))
        self.queries.update(other.queries)
        return self

    def adjoint(self) -> "Circuit":
        out = Circuit(self.layout)
        out.gates = [g.adjoint() for g in reversed(self.gates)]
        out.queries = Counter({_dag(k): v for k, v in self.queries.items()})
        return out

    def copy(self) -> "Circuit":
        out = Circuit(self.layout)
        out.gates = list(self.gates)
        out.queries = Counter(self.queries)
        return out

    def as_oracle(self, name: str) -> "Circuit":
        """The same unitary, accounted as a single use of oracle ``name``."""
        out = Circuit(self.layout)
        out.gates = [Gate(g.kind, g.targets, g.params, g.controls, g.control_values, g.matrix, name)
                     for g in self.gates]
        out.queries = Counter({name: 1})
        return out

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise CircuitError("width mismatch")
        return self.copy().compose(other)

    def __len__(self):
        return len(self.gates)

    # accounting ---------------------------------------------------------
    @property
    def query_count_U(self) -> int:
        return sum(v for k, v in self.queries.items() if not k.endswith("^dag"))

    @property
    def query_count_Udag(self) -> int:
        return sum(v for k, v in self.queries.items() if k.endswith("^dag"))

    def gate_counts(self) -> dict:
        """Logical gate census of non-oracle gates plus an elementary estimate.

        A k-controlled single-qubit gate is costed as one gate for k <= 1, a
        15-gate Toffoli-class gate for k = 2, and 4(k-2)+1 Toffolis for k >= 3
        (linear decomposition with one clean work qubit).
        """
        logical = Counter()
        elementary = 0
        for g in self.gates:
            if g.tag:
                continue
            k = len(g.controls)
            logical[(g.kind, k)] += 1
            if g.kind == "unitary":
                elementary += 4 ** len(g.targets)
            elif k <= 1:
                elementary += 1
            elif k == 2:
                elementary += 15
            else:
                elementary += 15 * (4 * (k - 2) + 1)
        return {"logical": dict(logical), "elementary": elementary,
                "oracle_gates": sum(1 for g in self.gates if g.tag)}

    # serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "registers": self.layout.to_json(),
            "queries": dict(self.queries),
            "gates": [g.to_json() for g in self.gates],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Circuit":
        layout = Layout((r["name"], r["width"]) for r in d["registers"])
        out = cls(layout, (Gate.from_json(g) for g in d["gates"]), d.get("queries"))
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json())


# simulation ---------------------------------------------------------------

def _apply_inplace(psi: np.ndarray, gate: Gate) -> None:
    """Apply ``gate`` to a tensor of shape (2,)*m + batch in place."""
    idx = [slice(None)] * psi.ndim
    for c, v in zip(gate.controls, gate.control_values):
        idx[c] = v
    sub = psi[tuple(idx)] if gate.controls else psi
    shift = lambda q: q - sum(1 for c in gate.controls if c < q)  # noqa: E731
    kind = gate.kind
    if kind == "unitary":
        k = len(gate.targets)
        axes = [shift(t) for t in gate.targets]
        moved = np.moveaxis(sub, axes, range(k))
        shape = moved.shape
        res = np.asarray(gate.matrix, dtype=complex) @ moved.reshape(2**k, -1)
        moved[...] = res.reshape(shape)
        return
    t = shift(gate.targets[0])
    i0 = [slice(None)] * sub.ndim
    i1 = list(i0)
    i0[t], i1[t] = slice(0, 1), slice(1, 2)
    s0, s1 = sub[tuple(i0)], sub[tuple(i1)]
    if kind == "gphase":
        sub *= np.exp(1j * gate.params[0])
    elif kind in ("z", "s", "sdg", "rz"):
        d = gate.dense()
        if d[0, 0] != 1:
            s0 *= d[0, 0]
        s1 *= d[1, 1]
    elif kind == "x":
        tmp = s0.copy()
        s0[...] = s1
        s1[...] = tmp
    else:
        m = gate.dense()
        a, b = s0.copy(), s1.copy()
        s0[...] = m[0, 0] * a + m[0, 1] * b
        s1[...] = m[1, 0] * a + m[1, 1] * b


def simulate(psi: np.ndarray, circuit: Circuit, batch: bool = False) -> np.ndarray:
    """Run ``circuit`` on a raw amplitude array (copied), optionally batched on the last axis."""
    m = circuit.num_qubits
    extra = psi.shape[1:] if batch else ()
    t = np.array(psi, dtype=complex).reshape((2,) * m + tuple(extra))
    for g in circuit.gates:
        _apply_inplace(t, g)
    return t.reshape((2**m,) + tuple(extra))


def apply_gate(state: QuantumState, gate: Gate) -> QuantumState:
    m = state.num_qubits
    for q in gate.targets + gate.controls:
        if not 0 <= q < m:
            raise CircuitError(f"qubit index {q} out of range")
    t = state.amplitudes.copy().reshape((2,) * m)
    _apply_inplace(t, gate)
    return QuantumState(t.reshape(-1), state.layout, check=False)


def run_circuit(initial: QuantumState, circuit: Circuit) -> QuantumState:
    """Apply every gate in order. Query counters stay on ``circuit.queries``."""
    if initial.num_qubits != circuit.num_qubits:
        raise CircuitError(f"state has {initial.num_qubits} qubits, circuit {circuit.num_qubits}")
    layout = initial.layout
    if layout.registers == (("q", initial.num_qubits),):
        layout = circuit.layout
    return QuantumState(simulate(initial.amplitudes, circuit), layout, check=False)


@dataclass(frozen=True)
class ProjectionOutcome:
    post_state: QuantumState
    probability: float


def project(state: QuantumState, qubits: Sequence[int], outcome: str | Sequence[int],
            floor: float = NORM_FLOOR) -> ProjectionOutcome:
    """Project ``qubits`` onto ``outcome`` and drop them from the post-measurement state."""
    qubits = list(qubits)
    bits = [int(b) for b in outcome]
    m = state.num_qubits
    if len(bits) != len(qubits):
        raise CircuitError("outcome length does not match qubit subset")
    if len(set(qubits)) != len(qubits) or any(not 0 <= q < m for q in qubits):
        raise CircuitError(f"invalid qubit subset {qubits}")
    idx = [slice(None)] * m
    for q, b in zip(qubits, bits):
        idx[q] = b
    part = state.tensor()[tuple(idx)].reshape(-1)
    prob = float(np.vdot(part, part).real)
    if prob <= floor:
        raise ProjectionError(f"outcome {''.join(map(str, bits))} has probability {prob:.3e}")
    post = QuantumState(part / np.sqrt(prob), state.layout.without(qubits), check=False)
    return ProjectionOutcome(post, min(prob, 1.0))


def marginal(state: QuantumState, qubits: Sequence[int]) -> np.ndarray:
    """Outcome probabilities of ``qubits`` (binary order of the listed qubits)."""
    m = state.num_qubits
    rest = [q for q in range(m) if q not in qubits]
    p = np.abs(state.tensor()) ** 2
    p = np.transpose(p, list(qubits) + rest).reshape(2 ** len(qubits), -1).sum(axis=1)
    return p


def dense_unitary(circuit: Circuit, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    m = circuit.num_qubits
    if m > cap:
        raise DenseCapError(f"{m} qubits exceeds dense cap {cap}")
    return simulate(np.eye(2**m, dtype=complex), circuit, batch=True)


def fidelity(a: QuantumState, b: QuantumState) -> float:
    if a.num_qubits != b.num_qubits:
        raise CircuitError("width mismatch")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))
