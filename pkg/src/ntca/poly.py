"""Bounded polynomial approximants with parity bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import polynomial as Pm

from .errors import PolynomialError

EVEN, ODD, MIXED = "EVEN", "ODD", "MIXED"
CERT_GRID = 4001
TAYLOR_GRID = 10001
MAX_TAYLOR_TERMS = 400


def _trim(c: np.ndarray) -> np.ndarray:
    c = np.array(c, dtype=complex).reshape(-1)
    if len(c) == 0:
        return np.zeros(1, dtype=complex)
    nz = np.nonzero(c)[0]
    return c[: nz[-1] + 1] if len(nz) else c[:1] * 0


@dataclass(frozen=True)
class PolynomialSpec:
    """Polynomial on [-1, 1] held in the Chebyshev basis.

    ``certified_error`` is the sup distance to ``target`` measured on a dense
    grid (0 when the polynomial is the target itself).
    """

    cheb: np.ndarray
    label: str = "poly"
    certified_error: float = 0.0
    target: Callable | None = field(default=None, compare=False, repr=False)
    tail_bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "cheb", _trim(self.cheb))

    # constructors -------------------------------------------------------
    @classmethod
    def from_monomial(cls, coeffs, **kw) -> "PolynomialSpec":
        coeffs = _trim(coeffs)
        n = len(coeffs)
        re = np.pad(C.poly2cheb(coeffs.real), (0, n))[:n]
        im = np.pad(C.poly2cheb(coeffs.imag), (0, n))[:n]
        return cls(re + 1j * im, **kw)

    @classmethod
    def from_chebyshev(cls, coeffs, **kw) -> "PolynomialSpec":
        return cls(np.asarray(coeffs, dtype=complex), **kw)

    @classmethod
    def zero(cls) -> "PolynomialSpec":
        return cls(np.zeros(1), label="0")

    # views --------------------------------------------------------------
    @property
    def monomial(self) -> np.ndarray:
        c = self.cheb
        n = len(c)
        re = np.pad(C.cheb2poly(c.real), (0, n))[:n]
        im = np.pad(C.cheb2poly(c.imag), (0, n))[:n]
        return _trim(re + 1j * im)

    @property
    def degree(self) -> int:
        return len(self.cheb) - 1

    @property
    def is_zero(self) -> bool:
        return not np.any(self.cheb)

    @property
    def is_real(self) -> bool:
        return not np.any(self.cheb.imag)

    @property
    def parity(self) -> str:
        odd_part = self.cheb[1::2]
        even_part = self.cheb[0::2]
        if not np.any(odd_part):
            return EVEN
        if not np.any(even_part):
            return ODD
        return MIXED

    @property
    def gamma(self) -> float:
        return sup_norm(self)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return C.chebval(x, self.cheb.real) + 1j * C.chebval(x, self.cheb.imag)

    def eval_monomial(self, x):
        return Pm.polyval(np.asarray(x, dtype=float), self.monomial)

    # algebra ------------------------------------------------------------
    def scaled(self, s: complex, label: str | None = None) -> "PolynomialSpec":
        return replace(self, cheb=self.cheb * s, label=label or f"{s}*{self.label}",
                       certified_error=abs(s) * self.certified_error,
                       target=None if self.target is None else (lambda x, t=self.target: s * t(x)),
                       tail_bound=None if self.tail_bound is None else abs(s) * self.tail_bound)

    def __add__(self, other: "PolynomialSpec") -> "PolynomialSpec":
        n = max(len(self.cheb), len(other.cheb))
        a = np.pad(self.cheb, (0, n - len(self.cheb)))
        b = np.pad(other.cheb, (0, n - len(other.cheb)))
        return PolynomialSpec(a + b, label=f"({self.label}+{other.label})",
                              certified_error=self.certified_error + other.certified_error)

    def real_part(self) -> "PolynomialSpec":
        return PolynomialSpec(self.cheb.real, label=f"Re({self.label})")

    def imag_part(self) -> "PolynomialSpec":
        return PolynomialSpec(self.cheb.imag, label=f"Im({self.label})")

    def with_target(self, target: Callable, label: str | None = None) -> "PolynomialSpec":
        err = measured_error(self, target)
        return replace(self, target=target, certified_error=err, label=label or self.label)

    # serialization ------------------------------------------------------
    def to_json(self) -> dict:
        pair = lambda z: [float(z.real), float(z.imag)]  # noqa: E731
        return {
            "label": self.label,
            "basis": "chebyshev",
            "coefficients": [pair(z) for z in self.cheb],
            "monomial": [pair(z) for z in self.monomial],
            "degree": self.degree,
            "parity": self.parity,
            "gamma": self.gamma,
            "certified_error": self.certified_error,
            "tail_bound": self.tail_bound,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PolynomialSpec":
        raw = [complex(*z) if isinstance(z, (list, tuple)) else complex(z) for z in d["coefficients"]]
        kw = dict(label=d.get("label", "poly"), certified_error=float(d.get("certified_error", 0.0)),
                  tail_bound=d.get("tail_bound"))
        if d.get("basis", "monomial") == "monomial":
            return cls.from_monomial(raw, **kw)
        return cls.from_chebyshev(raw, **kw)


def sup_norm(p: PolynomialSpec) -> float:
    """max |p(x)| on [-1, 1], from the critical points of |p|^2."""
    if p.is_zero:
        return 0.0
    m = p.monomial
    sq = Pm.polymul(m, np.conj(m)).real
    crit = Pm.polyroots(Pm.polyder(sq)) if len(sq) > 2 else np.array([])
    crit = crit[np.abs(crit.imag) < 1e-9].real if len(crit) else crit
    pts = np.concatenate([[-1.0, 1.0], crit[(crit >= -1) & (crit <= 1)], np.linspace(-1, 1, 2001)])
    return float(np.max(np.abs(p(pts))))


def measured_error(p: PolynomialSpec, f: Callable, grid: int = CERT_GRID) -> float:
    x = np.linspace(-1, 1, grid)
    fx = np.asarray(f(x), dtype=complex)
    if not np.all(np.isfinite(fx)):
        raise PolynomialError("target function returned non-finite values")
    return float(np.max(np.abs(p(x) - fx)))


@lru_cache(maxsize=None)
def bernoulli(m: int) -> Fraction:
    """B_m by the Akiyama-Tanigawa recurrence (B_1 = +1/2), exact."""
    a = [Fraction(0)] * (m + 1)
    for i in range(m + 1):
        a[i] = Fraction(1, i + 1)
        for j in range(i, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
    return a[0]


def tanh_taylor_coefficient(n: int) -> Fraction:
    """Coefficient of x^(2n-1) in the tanh series, exact."""
    b = bernoulli(2 * n)
    return (-1) ** (n - 1) * Fraction(2 ** (2 * n) * (2 ** (2 * n) - 1)) * abs(b) / math.factorial(2 * n)


def tanh_tail_bound(d: int) -> float:
    """Closed-form bound on |tanh - T_d| over [-1, 1] after d retained terms."""
    r = 2 / math.pi
    return 5 * math.sqrt(math.pi) / (1 - r) * r ** (d + 1)


def taylor_tanh(d: int) -> PolynomialSpec:
    """First ``d`` nonzero Taylor terms of tanh (degree 2d - 1)."""
    if d < 1:
        raise PolynomialError("need at least one Taylor term")
    if d > MAX_TAYLOR_TERMS:
        raise PolynomialError(f"d={d} exceeds the rational workspace ({MAX_TAYLOR_TERMS} terms)")
    mono = np.zeros(2 * d, dtype=complex)
    for n in range(1, d + 1):
        mono[2 * n - 1] = float(tanh_taylor_coefficient(n))
    p = PolynomialSpec.from_monomial(mono, label=f"tanh_taylor{d}", tail_bound=tanh_tail_bound(d))
    # parity must be exact; the basis change leaves O(eps) even entries
    p = replace(p, cheb=np.where(np.arange(len(p.cheb)) % 2 == 1, p.cheb, 0))
    return p.with_target(np.tanh, label=f"tanh_taylor{d}")


def taylor_tanh_measured(d: int, grid: int = TAYLOR_GRID) -> float:
    return measured_error(taylor_tanh(d), np.tanh, grid)


def minimal_taylor_terms(eps: float, use_bound: bool = False) -> int:
    """Smallest d whose tanh Taylor error is <= eps (grid-measured, or the closed-form bound)."""
    for d in range(1, MAX_TAYLOR_TERMS):
        err = tanh_tail_bound(d) if use_bound else taylor_tanh_measured(d)
        if err <= eps:
            return d
    raise PolynomialError(f"no d <= {MAX_TAYLOR_TERMS} reaches {eps}")


def chebyshev_fit(f: Callable, d: int, grid_size: int = CERT_GRID, label: str = "cheb") -> PolynomialSpec:
    """Degree-d interpolant at Chebyshev nodes; error measured on a grid, not proven."""
    if d < 0:
        raise PolynomialError("degree must be nonnegative")
    nodes = C.chebpts1(d + 1)
    vals = np.asarray(f(nodes), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise PolynomialError("target function returned non-finite values")
    re = C.chebfit(nodes, vals.real, d)
    im = C.chebfit(nodes, vals.imag, d)
    coef = re + 1j * im
    # drop round-off so numerically odd/even targets keep exact parity
    coef[np.abs(coef) < 1e-14 * max(1.0, np.abs(coef).max())] = 0
    p = PolynomialSpec(coef, label=label)
    err = measured_error(p, f, grid_size)
    return replace(p, certified_error=err, target=f)


def rescale_quarter(p: PolynomialSpec, gamma: float, tol: float = 1e-12) -> PolynomialSpec:
    """p / (4 gamma), whose sup on [-1, 1] is at most 1/4."""
    sup = sup_norm(p)
    if gamma <= 0 or sup > gamma * (1 + tol) + tol:
        raise PolynomialError(f"gamma={gamma} is below sup|p|={sup}")
    return p.scaled(1 / (4 * gamma), label=f"{p.label}/(4*{gamma:.6g})")


def parity_split(p: PolynomialSpec) -> tuple[PolynomialSpec, PolynomialSpec]:
    idx = np.arange(len(p.cheb))
    even = PolynomialSpec(np.where(idx % 2 == 0, p.cheb, 0), label=f"even({p.label})")
    odd = PolynomialSpec(np.where(idx % 2 == 1, p.cheb, 0), label=f"odd({p.label})")
    return even, odd


def monomial_power(k: int, scale: complex = 1.0) -> PolynomialSpec:
    mono = np.zeros(k + 1, dtype=complex)
    mono[k] = scale
    return PolynomialSpec.from_monomial(mono, label=f"x^{k}" if scale == 1 else f"{scale}x^{k}")


def chebyshev_T(k: int) -> PolynomialSpec:
    c = np.zeros(k + 1)
    c[k] = 1.0
    return PolynomialSpec(c, label=f"T{k}")


TARGETS: dict[str, Callable] = {
    "tanh": np.tanh,
    "x": lambda x: np.asarray(x, dtype=float),
    "x2": lambda x: np.asarray(x, dtype=float) ** 2,
    "abs": np.abs,
    "sin": np.sin,
    "relu": lambda x: np.maximum(x, 0.0),
    "sigmoid": lambda x: 1 / (1 + np.exp(-np.asarray(x, dtype=float))),
}


def exact(p: PolynomialSpec) -> PolynomialSpec:
    """The same polynomial, taken as its own target (zero approximation error)."""
    return replace(p, target=None, certified_error=0.0, tail_bound=None)


def resolve_poly_ref(ref) -> PolynomialSpec:
    """Polynomial from a JSON dict or a string reference.

    ``tanh:d``      first d Taylor terms of tanh, checked against tanh
    ``tanhpoly:d``  the same polynomial as an exact target
    ``cheb:f:d``    Chebyshev interpolant of a named function
    ``pow:k``       x^k;  ``T:k`` Chebyshev T_k
    ``x``, ``ix``, ``x2``, ``0``
    """
    if isinstance(ref, PolynomialSpec):
        return ref
    if isinstance(ref, dict):
        return PolynomialSpec.from_json(ref)
    ref = str(ref).strip()
    if ref in ("0", "zero", "none"):
        return PolynomialSpec.zero()
    if ref == "x":
        return monomial_power(1)
    if ref == "ix":
        return monomial_power(1, 1j)
    if ref == "x2":
        return monomial_power(2)
    parts = ref.split(":")
    try:
        if parts[0] == "tanh":
            return taylor_tanh(int(parts[1]) if len(parts) > 1 else 5)
        if parts[0] == "tanhpoly":
            return exact(taylor_tanh(int(parts[1]) if len(parts) > 1 else 5))
        if parts[0] == "pow" and len(parts) == 2:
            return monomial_power(int(parts[1]))
        if parts[0] == "T" and len(parts) == 2:
            return chebyshev_T(int(parts[1]))
    except ValueError as exc:
        raise PolynomialError(f"bad polynomial reference {ref!r}") from exc
    if parts[0] == "cheb" and len(parts) == 3 and parts[1] in TARGETS:
        return chebyshev_fit(TARGETS[parts[1]], int(parts[2]), label=f"cheb_{parts[1]}{parts[2]}")
    raise PolynomialError(f"unknown polynomial reference {ref!r}")
