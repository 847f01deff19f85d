"""State-preparation oracles from classical amplitude vectors.

Amplitude index k = 1..N maps to the computational basis label binary(k-1),
most significant qubit first. Vectors whose length is not a power of two are
zero padded.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CircuitError, NormalizationError
from .statevector import Circuit, Layout

PRUNE = 1e-15


@dataclass(frozen=True)
class AmplitudeVector:
    entries: np.ndarray

    def __post_init__(self):
        c = np.array(self.entries, dtype=complex).reshape(-1)
        if len(c) < 2:
            raise CircuitError("need at least two amplitudes")
        object.__setattr__(self, "entries", c)

    @property
    def N(self) -> int:
        return len(self.entries)

    @property
    def n(self) -> int:
        return int(np.ceil(np.log2(self.N)))

    @property
    def x(self) -> np.ndarray:
        return self.padded().real

    @property
    def y(self) -> np.ndarray:
        return self.padded().imag

    def padded(self) -> np.ndarray:
        out = np.zeros(2**self.n, dtype=complex)
        out[: self.N] = self.entries
        return out

    def norm_error(self) -> float:
        return abs(float(np.linalg.norm(self.entries)) - 1.0)

    def to_json(self) -> list:
        return [[float(z.real), float(z.imag)] for z in self.entries]


def random_vector(N: int, rng: np.random.Generator, real: bool = False) -> AmplitudeVector:
    v = rng.normal(size=N) + (0 if real else 1j * rng.normal(size=N))
    return AmplitudeVector(v / np.linalg.norm(v))


def load_vector(path: str | Path) -> AmplitudeVector:
    """Read a vector from JSON (``[[re, im], ...]`` or ``{"amplitudes": ...}``) or CSV rows ``re,im``."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with path.open() as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        vals = [complex(float(r[0]), float(r[1]) if len(r) > 1 else 0.0) for r in rows]
    else:
        data = json.loads(path.read_text())
        if isinstance(data, dict):
            data = data["amplitudes"]
        vals = [complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for v in data]
    return AmplitudeVector(np.array(vals))


def _controlled_rotation(circ: Circuit, kind: str, angle: float, target: int, level: int, prefix: int):
    if abs(angle) < PRUNE:
        return
    controls = list(range(level))
    values = [(prefix >> (level - 1 - i)) & 1 for i in range(level)]
    circ.add(kind, target, angle, controls, values)


def synthesize_state_prep(c: AmplitudeVector | np.ndarray, name: str | None = "U", tol: float = 1e-9) -> Circuit:
    """Rotation cascade U with U|0...0> = sum_k c_k |k>, accounted as one use of ``name``
    (plain gates when ``name`` is None).

    Magnitudes come from a tree of uniformly controlled Ry rotations, phases
    from a tree of uniformly controlled Rz rotations closed by an explicit
    global phase, so the prepared vector is exact including its phase.
    At most 2N - 1 rotations plus one phase gate.
    """
    c = c if isinstance(c, AmplitudeVector) else AmplitudeVector(c)
    if c.norm_error() > tol:
        raise NormalizationError(f"amplitude vector has norm {np.linalg.norm(c.entries):.12f}")
    vec = c.padded() / np.linalg.norm(c.entries)
    n = c.n
    circ = Circuit(Layout([("da", n)]))
    mags = np.abs(vec)
    for level in range(n):
        block = 2 ** (n - level)
        for p in range(2**level):
            seg = mags[p * block:(p + 1) * block]
            left = np.linalg.norm(seg[: block // 2])
            right = np.linalg.norm(seg[block // 2:])
            if left == 0 and right == 0:
                continue
            _controlled_rotation(circ, "ry", 2 * np.arctan2(right, left), level, level, p)
    phi = np.where(mags > 0, np.angle(vec), 0.0)
    for level in range(n - 1, -1, -1):
        pairs = phi.reshape(-1, 2)
        for p, (a, b) in enumerate(pairs):
            _controlled_rotation(circ, "rz", b - a, level, level, p)
        phi = pairs.mean(axis=1)
    if abs(phi[0]) > PRUNE:
        circ.add("gphase", 0, phi[0])
    return circ.as_oracle(name) if name else circ


def controlled(U: Circuit, value: int = 1, name: str = "ctrl") -> Circuit:
    """U conditioned on a fresh most-significant control qubit."""
    out = Circuit(Layout([(name, 1)] + list(U.layout.registers)))
    out.compose(U, list(range(1, U.num_qubits + 1)), controls=[0], values=[value])
    return out
