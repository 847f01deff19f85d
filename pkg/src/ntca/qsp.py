"""Quantum signal processing phase factors.

Solver convention ("Wx"): for phases psi_0..psi_d,

    U(x) = e^{i psi_0 Z} W(x) e^{i psi_1 Z} ... W(x) e^{i psi_d Z},
    W(x) = [[x, i sqrt(1-x^2)], [i sqrt(1-x^2), x]],

and the target f is matched by Re <0|U(x)|0>. Phases are kept symmetric,
psi_j = psi_{d-j}, and found by Levenberg-Marquardt on the positive Chebyshev
nodes, starting from psi_0 = psi_d = pi/4, all others 0.

Circuits use the reflection convention with d phases and
R(x) = [[x, sqrt(1-x^2)], [sqrt(1-x^2), -x]]. Since
R(x) = -i e^{i pi/4 Z} W(x) e^{i pi/4 Z}, the Wx phases map to

    phi_1 = psi_0 - pi/4,  phi_j = psi_{j-1} - pi/2  (j >= 2),

and the reflection-convention polynomial is kappa * P_Wx with
kappa = (-i)^d e^{i(pi/4 - psi_d)}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import least_squares

from .errors import PhaseFactorError, PolynomialError
from .poly import EVEN, MIXED, ODD, PolynomialSpec, sup_norm

DEFAULT_DEGREE_CAP = 60


def _rot(psi: np.ndarray) -> np.ndarray:
    return np.exp(1j * psi)


def wx_products(psi: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Full 2x2 QSP products for each x, shape (len(x), 2, 2)."""
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1 - x * x, 0, None))
    W = np.empty((len(x), 2, 2), dtype=complex)
    W[:, 0, 0] = W[:, 1, 1] = x
    W[:, 0, 1] = W[:, 1, 0] = 1j * s
    U = np.zeros((len(x), 2, 2), dtype=complex)
    U[:, 0, 0], U[:, 1, 1] = _rot(psi[0]), _rot(-psi[0])
    for p in psi[1:]:
        U = U @ W
        U[:, :, 0] *= _rot(p)
        U[:, :, 1] *= _rot(-p)
    return U


def wx_poly(psi, x) -> np.ndarray:
    return wx_products(np.asarray(psi, dtype=float), np.atleast_1d(x))[:, 0, 0]


def reflection_poly(phi, x) -> np.ndarray:
    """<0| prod_j e^{i phi_j Z} R(x) |0> with the product ordered left to right."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1 - x * x, 0, None))
    R = np.empty((len(x), 2, 2), dtype=complex)
    R[:, 0, 0], R[:, 1, 1] = x, -x
    R[:, 0, 1] = R[:, 1, 0] = s
    U = np.broadcast_to(np.eye(2, dtype=complex), (len(x), 2, 2)).copy()
    for p in phi:
        U[:, :, 0] *= _rot(p)
        U[:, :, 1] *= _rot(-p)
        U = U @ R
    return U[:, 0, 0]


def _expand(theta: np.ndarray, d: int) -> np.ndarray:
    idx = np.minimum(np.arange(d + 1), d - np.arange(d + 1))
    return np.asarray(theta, dtype=float)[idx]


def _residual_and_jac(theta, d, x, fx):
    psi = _expand(theta, d)
    m = len(x)
    s = np.sqrt(np.clip(1 - x * x, 0, None))
    W = np.empty((m, 2, 2), dtype=complex)
    W[:, 0, 0] = W[:, 1, 1] = x
    W[:, 0, 1] = W[:, 1, 0] = 1j * s
    # prefix[j] = e^{i psi_0 Z} W ... W   (everything left of e^{i psi_j Z})
    prefix = np.empty((d + 1, m, 2, 2), dtype=complex)
    cur = np.broadcast_to(np.eye(2, dtype=complex), (m, 2, 2)).copy()
    for j in range(d + 1):
        if j:
            cur = cur @ W
        prefix[j] = cur
        cur = cur.copy()
        cur[:, :, 0] *= _rot(psi[j])
        cur[:, :, 1] *= _rot(-psi[j])
    full = cur
    # suffix[j] = e^{i psi_j Z} W ... e^{i psi_d Z}
    suffix = np.empty((d + 1, m, 2, 2), dtype=complex)
    cur = np.broadcast_to(np.eye(2, dtype=complex), (m, 2, 2)).copy()
    for j in range(d, -1, -1):
        if j < d:
            cur = W @ cur
        cur = cur.copy()
        cur[:, 0, :] *= _rot(psi[j])
        cur[:, 1, :] *= _rot(-psi[j])
        suffix[j] = cur
    res = full[:, 0, 0].real - fx
    dfull = 1j * (prefix[:, :, 0, 0] * suffix[:, :, 0, 0] - prefix[:, :, 0, 1] * suffix[:, :, 1, 0])
    jac_full = dfull.real.T  # (m, d+1)
    h = len(theta)
    jac = np.zeros((m, h))
    for j in range(d + 1):
        jac[:, min(j, d - j)] += jac_full[:, j]
    return res, jac


@dataclass(frozen=True)
class PhaseFactors:
    angles: np.ndarray           # Wx convention, length degree + 1
    parity: str
    target: str = "poly"
    residual: float = 0.0
    convention: str = "Wx"

    @property
    def degree(self) -> int:
        return len(self.angles) - 1

    def reflection(self) -> tuple[np.ndarray, complex]:
        """(phi_1..phi_d, kappa) for the reflection-convention circuit."""
        psi = np.asarray(self.angles)
        d = self.degree
        if d == 0:
            return np.zeros(0), np.exp(-1j * psi[0])
        phi = np.empty(d)
        phi[0] = psi[0] - np.pi / 4
        phi[1:] = psi[1:d] - np.pi / 2
        kappa = (-1j) ** d * np.exp(1j * (np.pi / 4 - psi[d]))
        return phi, complex(kappa)

    def evaluate(self, x) -> np.ndarray:
        """Re <0|U(x)|0>, the realized polynomial."""
        return wx_poly(self.angles, x).real

    def to_json(self) -> dict:
        return {"convention": self.convention, "angles": [float(a) for a in self.angles],
                "parity": self.parity, "degree": self.degree, "target": self.target,
                "residual": self.residual}

    @classmethod
    def from_json(cls, d: dict) -> "PhaseFactors":
        if d.get("convention", "Wx") != "Wx":
            raise PhaseFactorError(f"unsupported convention {d.get('convention')}")
        return cls(np.asarray(d["angles"], dtype=float), d["parity"], d.get("target", "poly"),
                   float(d.get("residual", 0.0)))


def check_grid(d: int, size: int = 201) -> np.ndarray:
    return C.chebpts1(size)


def compute_phase_factors(p: PolynomialSpec, tol: float = 1e-10, degree_cap: int = DEFAULT_DEGREE_CAP,
                          seed: int = 0, max_nfev: int = 400, degree: int | None = None) -> PhaseFactors:
    """Symmetric Wx phases with Re <0|U(x)|0> = p(x) on [-1, 1].

    ``degree`` may exceed the polynomial degree (same parity) to pad the
    sequence to a prescribed number of oracle calls.
    """
    if not p.is_real:
        raise PolynomialError("phase factors need a real polynomial; split complex targets first")
    if p.parity == MIXED and not p.is_zero:
        raise PolynomialError("phase factors need definite parity")
    d = p.degree if degree is None else int(degree)
    if d < p.degree or (d - p.degree) % 2:
        raise PolynomialError(f"cannot realize degree {p.degree} with {d} calls")
    if d > degree_cap:
        raise PolynomialError(f"degree {d} exceeds cap {degree_cap}")
    sup = sup_norm(p)
    if sup > 1 + 1e-12:
        raise PolynomialError(f"sup |p| = {sup} exceeds 1")
    h = (d + 2) // 2
    nodes = np.cos((2 * np.arange(1, h + 1) - 1) * np.pi / (4 * h))
    fx = p(nodes).real
    grid = check_grid(d)
    f_grid = p(grid).real

    def solve(theta0, scale):
        sol = least_squares(lambda t: _residual_and_jac(t, d, nodes, scale * fx)[0], theta0,
                            jac=lambda t: _residual_and_jac(t, d, nodes, scale * fx)[1],
                            method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
        return sol.x

    def grid_residual(theta):
        return float(np.max(np.abs(wx_poly(_expand(theta, d), grid).real - f_grid)))

    theta0 = np.zeros(h)
    theta0[0] = np.pi / 4
    best = solve(theta0, 1.0)
    best_res = grid_residual(best)
    rng = np.random.default_rng(seed)
    attempt = 0
    while best_res > tol and attempt < 8:
        # continuation in the target amplitude, then perturbed restarts
        theta = theta0.copy()
        steps = np.linspace(0.25, 1.0, 4 + 2 * attempt)
        for sc in steps:
            theta = solve(theta + (1e-3 * rng.normal(size=h) if attempt else 0), sc)
        r = grid_residual(theta)
        if r < best_res:
            best, best_res = theta, r
        attempt += 1
    if best_res > tol:
        raise PhaseFactorError(f"phase solver reached residual {best_res:.3e} > {tol:.1e}", best_res)
    parity = ODD if d % 2 else EVEN
    return PhaseFactors(_expand(best, d), parity, p.label, best_res)
