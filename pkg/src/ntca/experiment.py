"""Batch experiments driven by a JSON configuration, plus the query-scaling sweep."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata, resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .block_encoding import Kind, build_Gtilde, extract_block, multiset_contains
from .errors import ConfigError, DenseCapError, NormalizationError, NtcaError, UnamplifiableError
from .oracle import AmplitudeVector, load_vector, random_vector, synthesize_state_prep
from .pipeline import NtcaConfig, error_ledger, run_ntca
from .poly import MIXED, PolynomialSpec, monomial_power, resolve_poly_ref, sup_norm
from .qnn import LayerSpec, estimate_nodes, multi_layer, random_orthogonal
from .qsvt import assemble_qsvt, complex_poly_block, real_poly_block, reference_matrix_function
from .statevector import DEFAULT_DENSE_CAP

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 2, 3
PROBABILITY_TOL = 1e-9


def load_schema() -> dict:
    return json.loads(resources.files("ntca").joinpath("schema.json").read_text())


def validate_config(config: dict) -> None:
    try:
        jsonschema.validate(config, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        config = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validate_config(config)
    return config


# ---------------------------------------------------------------------------
# payload resolution
# ---------------------------------------------------------------------------

def _complex_list(values) -> np.ndarray:
    return np.array([complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for v in values])


def resolve_vector(spec, rng: np.random.Generator, base: Path | None = None) -> AmplitudeVector:
    if isinstance(spec, list):
        return AmplitudeVector(_complex_list(spec))
    if "random" in spec:
        return random_vector(spec["random"]["N"], rng, spec["random"].get("real", False))
    if "basis" in spec:
        k, N = spec["basis"], spec.get("N", 2)
        if k > N:
            raise ConfigError(f"basis index {k} outside 1..{N}")
        v = np.zeros(N, dtype=complex)
        v[k - 1] = 1
        return AmplitudeVector(v)
    path = Path(spec["path"])
    if base is not None and not path.is_absolute():
        path = base / path
    try:
        return load_vector(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load vector from {path}: {exc}") from exc


def resolve_poly(spec) -> PolynomialSpec:
    if spec is None:
        return PolynomialSpec.zero()
    if isinstance(spec, dict):
        return PolynomialSpec.from_json(spec)
    return resolve_poly_ref(spec)


def resolve_matrix(spec, rng: np.random.Generator) -> np.ndarray:
    if isinstance(spec, dict) and "random_orthogonal" in spec:
        return random_orthogonal(spec["random_orthogonal"], rng)
    if isinstance(spec, dict):
        perm = spec["permutation"]
        if sorted(perm) != list(range(len(perm))):
            raise ConfigError("permutation must list 0..N-1 once each")
        return np.eye(len(perm))[perm]
    rows = [_complex_list(r) for r in spec]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError("weight matrix rows differ in length")
    return np.array(rows)


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

@dataclass
class Report:
    task: str
    seed: int
    result: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    error: dict | None = None

    def check(self, name: str, passed: bool, **detail) -> bool:
        self.assertions.append({"name": name, "passed": bool(passed), **detail})
        return bool(passed)

    @property
    def ok(self) -> bool:
        return self.error is None and all(a["passed"] for a in self.assertions)

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return self.error["exit_code"]
        return EXIT_OK if self.ok else EXIT_CONTRACT

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "task": self.task,
            "seed": self.seed,
            "versions": versions(),
            "ok": self.ok,
            "exit_code": self.exit_code,
            "result": self.result,
            "counters": self.counters,
            "assertions": self.assertions,
            "error": self.error,
            "timings": self.timings,
        }


def versions() -> dict:
    return {"ntca": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "jsonschema": metadata.version("jsonschema")}


def _plain(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not serializable: {type(obj).__name__}")


def dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_plain) + "\n"


def _pairs(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

def _matched(eig: np.ndarray, targets) -> list[float]:
    """Greedy nearest eigenvalue for each target, each eigenvalue used once; sorted."""
    pool = list(eig)
    out = []
    for t in sorted(targets):
        j = int(np.argmin([abs(e - t) for e in pool]))
        out.append(float(pool.pop(j)))
    return sorted(out)


def _kinds(kind: str) -> list[Kind]:
    return {"real": [Kind.REAL_PART], "imag": [Kind.IMAG_PART], "both": [Kind.REAL_PART, Kind.IMAG_PART]}[kind]


def block_encode_task(payload: dict, rng, report: Report, cap: int, base: Path | None = None) -> None:
    c = resolve_vector(payload["vector"], rng, base)
    tol = payload.get("tol", 1e-9)
    U = synthesize_state_prep(c)
    report.result["N"] = c.N
    for kind in _kinds(payload.get("kind", "both")):
        be = build_Gtilde(U, kind)
        block = extract_block(be, cap)
        herm = float(np.abs(block - block.conj().T).max())
        eig = np.sort(np.linalg.eigvalsh((block + block.conj().T) / 2))
        coords = c.x if kind is Kind.REAL_PART else c.y
        key = "real" if kind is Kind.REAL_PART else "imag"
        queries = be.circuit.query_count_U + be.circuit.query_count_Udag
        report.result[key] = {"spectrum": _matched(eig, coords), "eigenvalues": eig.tolist(),
                              "hermiticity_residual": herm, "qubits": be.circuit.num_qubits}
        report.counters[f"queries_{key}"] = queries
        report.check(f"{key}_spectrum_contains_amplitudes", multiset_contains(eig, coords, tol), tol=tol)
        report.check(f"{key}_hermitian", herm < 1e-10, residual=herm)
        report.check(f"{key}_four_queries", queries == 4, queries=queries)


def _qsvt_for(be, p: PolynomialSpec, tol: float, N: int):
    sup = sup_norm(p)
    if p.is_real and p.parity != MIXED and not p.is_zero and sup <= 1 + 1e-12:
        return assemble_qsvt(be, p, tol, N)
    if p.is_real and sup <= 0.5 + 1e-12:
        return real_poly_block(be, p, tol, N)
    return complex_poly_block(be, p, tol, N)


def qsvt_check_task(payload: dict, rng, report: Report, cap: int, base: Path | None = None) -> None:
    c = resolve_vector(payload["vector"], rng, base)
    p = resolve_poly(payload["poly"])
    tol = payload.get("tol", 1e-9)
    kind = Kind.parse(payload.get("kind", "real"))
    be = build_Gtilde(synthesize_state_prep(c), kind)
    A = extract_block(be, cap)
    N = 2 ** be.system_width
    q = _qsvt_for(be, p, tol, N)
    t0 = time.perf_counter()
    blk = q.block(cap)
    report.timings["extract_s"] = time.perf_counter() - t0
    residual = float(np.abs(blk - reference_matrix_function(A, p)).max())
    report.result.update({"polynomial": p.label, "degree": p.degree, "calls": q.calls, "ancillas": q.ancillas,
                          "qubits": q.circuit.num_qubits, "residual": residual, "bound": q.error_bound,
                          "phase_residuals": [pf.residual for pf in q.phases if pf is not None]})
    report.counters["queries"] = q.circuit.query_count_U + q.circuit.query_count_Udag
    report.check("block_matches_reference", residual <= q.error_bound, residual=residual, bound=q.error_bound)


def ntca_config_from(payload: dict, rng, seed: int, base: Path | None = None) -> NtcaConfig:
    c = resolve_vector(payload["vector"], rng, base)
    return NtcaConfig(c, resolve_poly(payload["P"]), resolve_poly(payload.get("Q")), payload.get("gamma"),
                      payload.get("epsilon", 1e-2), payload.get("variant", "full"), payload.get("N1"),
                      payload.get("amplification", "none"), seed)


def ntca_task(payload: dict, rng, report: Report, cap: int, base: Path | None = None) -> None:
    cfg = ntca_config_from(payload, rng, report.seed, base)
    res = run_ntca(cfg)
    out = res.to_json()
    out.pop("output_state")
    out["output_amplitudes"] = _pairs(res.output_state.amplitudes)
    out["b_raw"] = _pairs(res.b_raw)
    out["config"] = cfg.to_json()
    report.result.update(out)
    report.counters.update({"queries_per_invocation": res.queries_per_invocation,
                            "queries_controlled_U": res.queries_controlled_U,
                            "expected_queries": res.expected_queries, "invocations": res.invocations})
    report.check("per_point_error", res.per_point_error <= res.per_point_error_bound,
                 measured=res.per_point_error, bound=res.per_point_error_bound)
    gap = abs(res.success_probability - res.predicted_success_probability)
    report.check("success_probability", gap <= PROBABILITY_TOL, gap=gap)
    if payload.get("ledger", False):
        led = error_ledger(cfg, res)
        report.result["ledger"] = led.to_json()
        report.check("error_ledger", led.ok)


def qnn_task(payload: dict, rng, report: Report, cap: int, base: Path | None = None) -> None:
    c = resolve_vector(payload["vector"], rng, base)
    layers = [LayerSpec(resolve_matrix(L["V"], rng), resolve_poly(L["P"]), resolve_poly(L.get("Q")),
                        L.get("width"), L.get("real", False)) for L in payload["layers"]]
    eps = payload.get("epsilon", 1e-2)
    res = multi_layer(c, layers, eps, payload.get("amplification", "none"), report.seed)
    report.result.update(res.to_json())
    report.counters.update({"psi_queries_per_run": res.psi_queries_per_run,
                            "psi_queries_total": res.psi_queries_total, "layer_queries": res.layer_queries})
    report.check("matches_classical", res.ok, measured=res.per_point_error, bound=res.error_bound)
    readout = payload.get("readout")
    if readout is not None:
        if len(layers) != 1:
            raise ConfigError("node readout is available for single-layer networks")
        beta = readout.get("beta", 0.05)
        est = estimate_nodes(c, layers[0], beta=beta, mode=readout.get("mode", "exact"), seed=report.seed)
        report.result["nodes"] = [e.to_json() for e in est]
        report.counters["readout_queries"] = sum(e.queries_used for e in est)
        worst = max(e.error for e in est)
        report.check("node_estimates", worst <= beta, worst=worst, beta=beta)


# ---------------------------------------------------------------------------
# scaling sweep
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("N", "d", "status", "success_probability", "predicted_success_probability",
                 "queries_per_invocation", "expected_queries", "realized_queries", "invocations")


def sweep_point(N: int, d: int, eps: float = 1e-2, family: str = "power",
                amplification: str = "amplitude_amplify", seed: int = 0) -> dict:
    """One grid point: P = x^d (or 0) on the basis input e_1, so sum |P(x_k)|^2 = 1 for every N."""
    c = np.zeros(N, dtype=complex)
    c[0] = 1
    P = monomial_power(d) if family == "power" else PolynomialSpec.zero()
    row = dict.fromkeys(SWEEP_COLUMNS)
    row.update(N=N, d=d)
    try:
        res = run_ntca(NtcaConfig(AmplitudeVector(c), P, epsilon=eps, amplification=amplification, seed=seed))
    except UnamplifiableError:
        row["status"] = "UNAMPLIFIABLE"
        return row
    row.update(status="OK", success_probability=res.success_probability,
               predicted_success_probability=res.predicted_success_probability,
               queries_per_invocation=res.queries_per_invocation, expected_queries=res.expected_queries,
               realized_queries=res.queries_controlled_U, invocations=res.invocations)
    return row


def _sweep_star(args):
    return sweep_point(*args)


def _slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


@dataclass
class SweepResult:
    rows: list[dict]
    fits: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: ("" if r[k] is None else r[k]) for k in SWEEP_COLUMNS})
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"rows": self.rows, "fits": self.fits}


def _fits(rows: list[dict]) -> dict:
    ok = [r for r in rows if r["status"] == "OK"]
    fits = {"vs_N": [], "vs_d": []}
    for d in sorted({r["d"] for r in ok}):
        sel = sorted((r for r in ok if r["d"] == d), key=lambda r: r["N"])
        if len(sel) > 1:
            Ns, q = [r["N"] for r in sel], [r["expected_queries"] for r in sel]
            fits["vs_N"].append({"d": d, "N": Ns, "exponent": _slope(Ns, q), "predicted_exponent": 0.5,
                                 "ratios": [b / a for a, b in zip(q, q[1:])]})
    for N in sorted({r["N"] for r in ok}):
        sel = sorted((r for r in ok if r["N"] == N and r["d"] > 0), key=lambda r: r["d"])
        if len(sel) > 1:
            ds, q = [r["d"] for r in sel], [r["expected_queries"] for r in sel]
            fits["vs_d"].append({"N": N, "d": ds, "exponent": _slope(ds, q), "predicted_exponent": 1.0,
                                 "ratios": [b / a for a, b in zip(q, q[1:])]})
    return fits


def scaling_sweep(Ns=(2, 4, 8), degrees=(1,), eps: float = 1e-2, family: str = "power",
                  amplification: str = "amplitude_amplify", seed: int = 0, workers: int = 1,
                  dense_cap: int | None = None) -> SweepResult:
    """Controlled-U counts over an (N, d) grid with log-log slopes against N and d."""
    dense_cap = dense_cap or DEFAULT_DENSE_CAP
    for N in Ns:
        width = 2 * math.ceil(math.log2(N)) + 6
        if width > dense_cap:
            raise DenseCapError(f"N={N} needs {width} qubits, above the cap {dense_cap}")
    grid = [(N, d, eps, family, amplification, seed) for N in Ns for d in degrees]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_star, grid))
    else:
        rows = [_sweep_star(g) for g in grid]
    return SweepResult(rows, _fits(rows))


def sweep_task(payload: dict, rng, report: Report, cap: int, base: Path | None = None) -> SweepResult:
    res = scaling_sweep(payload.get("N", [2, 4, 8]), payload.get("d", [1]), payload.get("epsilon", 1e-2),
                        payload.get("family", "power"), payload.get("amplification", "amplitude_amplify"),
                        report.seed, payload.get("workers", 1), cap)
    report.result.update(res.to_json())
    report.counters["expected_queries"] = [r["expected_queries"] for r in res.rows]
    ok = [r for r in res.rows if r["status"] == "OK"]
    for fit_key, axis in (("vs_N", "N"), ("vs_d", "d")):
        for f in res.fits[fit_key]:
            mono = all(r >= 1 for r in f["ratios"])
            report.check(f"monotone_in_{axis}", mono, **{k: v for k, v in f.items() if k != "ratios"})
    report.result["unamplifiable"] = len(res.rows) - len(ok)
    return res


TASKS = {
    "BLOCK_ENCODE": ("block_encode", block_encode_task),
    "QSVT_CHECK": ("qsvt_check", qsvt_check_task),
    "NTCA": ("ntca", ntca_task),
    "QNN": ("qnn", qnn_task),
    "SCALING_SWEEP": ("sweep", sweep_task),
}


def _error(exc: Exception, code: int) -> dict:
    return {"type": type(exc).__name__, "message": str(exc), "exit_code": code}


def execute(config: dict, base: Path | None = None, dense_cap: int | None = None) -> tuple[Report, object]:
    """Validate and run a config; errors are captured in the report rather than raised."""
    validate_config(config)
    seed = config.get("seed", 0)
    task = config["task"]
    key, fn = TASKS[task]
    report = Report(task, seed)
    cap = dense_cap if dense_cap is not None else config.get("dense_cap", DEFAULT_DENSE_CAP)
    rng = np.random.default_rng(seed)
    extra = None
    t0 = time.perf_counter()
    try:
        extra = fn(config[key], rng, report, cap, base)
    except (ConfigError, DenseCapError, NormalizationError) as exc:
        report.error = _error(exc, EXIT_CONFIG)
    except NtcaError as exc:
        report.error = _error(exc, EXIT_CONTRACT)
    report.timings["total_s"] = time.perf_counter() - t0
    if report.error:
        log.error("%s failed: %s", task, report.error["message"])
    return report, extra


def run_experiment(config: dict | str | Path, output: str | Path | None = None,
                   dense_cap: int | None = None) -> Report:
    """Run one configured experiment and write its JSON report (and CSV table for sweeps)."""
    base = None
    if not isinstance(config, dict):
        base = Path(config).parent
        config = load_config(config)
    report, extra = execute(config, base, dense_cap)
    out = output if output is not None else config.get("output")
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(dumps(report.to_json()))
        if isinstance(extra, SweepResult):
            csv_path = Path(config["sweep"].get("csv", out.with_suffix(".csv")))
            csv_path.write_text(extra.to_csv())
    return report


def deterministic_view(report_json: dict) -> dict:
    """Report with the wall-clock fields removed, for reproducibility comparisons."""
    return {k: v for k, v in report_json.items() if k != "timings"}


__all__ = [
    "EXIT_CONFIG", "EXIT_CONTRACT", "EXIT_OK", "Report", "SCHEMA_VERSION", "SweepResult", "deterministic_view",
    "execute", "load_config", "load_schema", "run_experiment", "scaling_sweep", "sweep_point", "validate_config",
]
