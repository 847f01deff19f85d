"""Command-line front end.

Every subcommand prints a JSON document (or CSV for ``sweep``) and exits with
0 on success, 2 on a configuration error and 3 when a numerical contract fails.
The log level comes from the ``NTCA_LOG_LEVEL`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .block_encoding import BlockEncoding, Kind, build_Gtilde, extract_block
from .errors import ConfigError, DenseCapError, NormalizationError, NtcaError, PolynomialError
from .experiment import (
    EXIT_CONFIG, EXIT_CONTRACT, EXIT_OK, SCHEMA_VERSION, dumps, execute, load_config, resolve_poly, resolve_vector,
)
from .oracle import synthesize_state_prep
from .poly import TARGETS, chebyshev_fit, minimal_taylor_terms, sup_norm, taylor_tanh
from .qsp import DEFAULT_DEGREE_CAP, PhaseFactors, compute_phase_factors
from .qsvt import assemble_qsvt, reference_matrix_function
from .statevector import DEFAULT_DENSE_CAP

LOG_ENV = "NTCA_LOG_LEVEL"
MAX_FIT_DEGREE = 200
AMPLIFY = {"none": "none", "repeat": "measure_until_success", "auto": "amplitude_amplify",
           "measure_until_success": "measure_until_success", "amplitude_amplify": "amplitude_amplify"}


def _vector(text: str):
    """Inline JSON list, ``random:N``, ``random:N:real``, ``basis:k:N`` or a file path."""
    if text.lstrip().startswith("["):
        return json.loads(text)
    parts = text.split(":")
    if parts[0] == "random" and len(parts) in (2, 3):
        return {"random": {"N": int(parts[1]), "real": len(parts) == 3 and parts[2] == "real"}}
    if parts[0] == "basis" and len(parts) == 3:
        return {"basis": int(parts[1]), "N": int(parts[2])}
    return {"path": str(Path(text).resolve())}


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _poly(text: str | None):
    if text is None:
        return None
    if text.lstrip().startswith("{"):
        return json.loads(text)
    if text.endswith(".json"):
        return _read_json(text)
    return text


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _run_config(args, config: dict, base: Path | None = None, emit: str | None = None) -> int:
    config.setdefault("schema_version", SCHEMA_VERSION)
    config.setdefault("seed", args.seed)
    report, extra = execute(config, base, dense_cap=args.dense_cap)
    text = dumps(report.to_json())
    if args.cmd == "sweep" and extra is not None:
        if args.report:
            _write(args.report, text)
        _write(emit, extra.to_csv())
    else:
        _write(emit, text)
        if extra is not None and emit:
            csv_path = config["sweep"].get("csv") or Path(emit).with_suffix(".csv")
            Path(csv_path).write_text(extra.to_csv())
    if report.error:
        print(f"error: {report.error['message']}", file=sys.stderr)
    return report.exit_code


def cmd_run(args) -> int:
    config = load_config(args.config)
    return _run_config(args, config, Path(args.config).resolve().parent, args.emit or config.get("output"))


def cmd_block_encode(args) -> int:
    src = args.input or args.vector
    if src is None:
        raise ConfigError("block-encode needs --input")
    if args.emit:
        if args.kind == "both":
            raise ConfigError("--emit writes one circuit; pick --kind real or --kind imag")
        vec = resolve_vector(_vector(src), np.random.default_rng(args.seed))
        _write(args.emit, dumps(build_Gtilde(synthesize_state_prep(vec), Kind.parse(args.kind)).to_json()))
        if not args.check:
            return EXIT_OK
    return _run_config(args, {"task": "BLOCK_ENCODE", "block_encode": {"vector": _vector(src), "kind": args.kind}})


def _fit(fn: str, eps: float | None, method: str, degree: int | None):
    if fn not in TARGETS:
        raise ConfigError(f"unknown function {fn!r}; choose from {sorted(TARGETS)}")
    if method == "taylor":
        if fn != "tanh":
            raise ConfigError("the Taylor method is available for tanh only")
        return taylor_tanh(degree if degree is not None else minimal_taylor_terms(eps))
    f = TARGETS[fn]
    if degree is not None:
        return chebyshev_fit(f, degree, label=f"cheb_{fn}{degree}")
    for d in range(MAX_FIT_DEGREE + 1):
        p = chebyshev_fit(f, d, label=f"cheb_{fn}{d}")
        if p.certified_error <= eps:
            return p
    raise PolynomialError(f"no Chebyshev degree <= {MAX_FIT_DEGREE} reaches {eps}")


def cmd_poly(args) -> int:
    if args.action == "min-terms":
        eps = args.eps or [1e-2, 1e-3, 1e-4]
        _write(args.emit, dumps({"minimal_terms": {str(e): minimal_taylor_terms(e) for e in eps}}))
        return EXIT_OK
    if args.action == "show":
        p = resolve_poly(_poly(args.ref))
    else:
        if args.degree is None and not args.eps:
            raise ConfigError("poly fit needs --eps or --degree")
        p = _fit(args.fn, args.eps[0] if args.eps else None, args.method, args.degree)
    doc = p.to_json()
    doc["sup_norm"] = sup_norm(p)
    _write(args.emit, dumps(doc))
    return EXIT_OK


def _check_files(args) -> int:
    """Block of assemble_qsvt(be, phases) against the eigendecomposition reference."""
    if not (args.be and args.phases):
        raise ConfigError("--be and --phases go together")
    be = BlockEncoding.from_json(_read_json(args.be))
    pf = PhaseFactors.from_json(_read_json(args.phases))
    cap = args.dense_cap or DEFAULT_DENSE_CAP
    A = extract_block(be, cap)
    q = assemble_qsvt(be, pf, tol=max(args.tol, pf.residual))
    residual = float(np.abs(q.block(cap) - reference_matrix_function(A / be.alpha, pf.evaluate)).max())
    ok = residual <= q.error_bound
    _write(args.emit, dumps({"residual": residual, "bound": q.error_bound, "ok": ok, "calls": q.calls,
                             "queries": q.circuit.query_count_U + q.circuit.query_count_Udag}))
    return EXIT_OK if ok else EXIT_CONTRACT


def cmd_qsvt(args) -> int:
    if args.action == "phases":
        if not args.poly:
            raise ConfigError("qsvt phases needs --poly")
        pf = compute_phase_factors(resolve_poly(_poly(args.poly)), tol=args.tol, degree_cap=args.degree_cap,
                                   seed=args.seed)
        phi, kappa = pf.reflection()
        doc = pf.to_json()
        doc["reflection"] = {"phi": [float(v) for v in phi], "kappa": [kappa.real, kappa.imag]}
        _write(args.emit, dumps(doc))
        return EXIT_OK
    if args.be or args.phases:
        return _check_files(args)
    if not args.poly:
        raise ConfigError("qsvt check needs --poly, or both --be and --phases")
    return _run_config(args, {"task": "QSVT_CHECK", "qsvt_check": {
        "vector": _vector(args.input), "poly": _poly(args.poly), "kind": args.kind, "tol": args.tol}}, emit=args.emit)


def _variant(text: str) -> tuple[str, int | None]:
    if text.startswith("partial"):
        _, _, n1 = text.partition(":")
        return "partial", int(n1) if n1 else None
    return {"full": "full", "real": "real_only", "real_only": "real_only"}[text], None


def cmd_ntca(args) -> int:
    if args.config:
        return cmd_run(args)
    if not (args.input and args.poly_p):
        raise ConfigError("ntca run needs --config, or both --input and --poly-p")
    try:
        variant, n1 = _variant(args.variant)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad --variant {args.variant!r}") from exc
    payload = {"vector": _vector(args.input), "P": _poly(args.poly_p), "epsilon": args.eps,
               "variant": variant, "amplification": AMPLIFY[args.amplify], "ledger": not args.no_ledger}
    if args.poly_q:
        payload["Q"] = _poly(args.poly_q)
    if n1 is not None:
        payload["N1"] = n1
    if args.gamma:
        payload["gamma"] = args.gamma
    return _run_config(args, {"task": "NTCA", "ntca": payload}, emit=args.emit)


def cmd_qnn(args) -> int:
    if args.config:
        return cmd_run(args)
    if not (args.input and args.layers):
        raise ConfigError("qnn run needs --config, or both --input and --layers")
    payload = {"vector": _vector(args.input), "layers": _read_json(args.layers), "epsilon": args.eps,
               "amplification": AMPLIFY[args.amplify]}
    if args.readout != "none":
        kind, _, beta = args.readout.partition(":")
        if kind != "estimate":
            raise ConfigError(f"bad --readout {args.readout!r}")
        payload["readout"] = {"beta": float(beta) if beta else 0.05, "mode": args.mode}
    return _run_config(args, {"task": "QNN", "qnn": payload}, emit=args.emit)


def cmd_sweep(args) -> int:
    return _run_config(args, {"task": "SCALING_SWEEP", "sweep": {
        "N": args.N, "d": args.d, "epsilon": args.eps, "family": args.family,
        "amplification": AMPLIFY[args.amplify], "workers": args.workers}}, emit=args.emit)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--dense-cap", type=int, default=None,
                        help=f"widest circuit for dense extraction (default {DEFAULT_DENSE_CAP})")
    common.add_argument("--emit", metavar="PATH", help="write the main output here instead of stdout")
    vec_help = "vector: JSON list, random:N[:real], basis:k:N, or a .json/.csv file"
    amp = sorted(AMPLIFY)

    parser = argparse.ArgumentParser(prog="ntca", description="Nonlinear transformation of complex amplitudes.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", parents=[common], help="run an experiment config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("block-encode", parents=[common], help="block-encode the amplitude parts")
    p.add_argument("vector", nargs="?", help=vec_help)
    p.add_argument("--input", help=vec_help)
    p.add_argument("--kind", choices=["real", "imag", "both"], default="both")
    p.add_argument("--check", action="store_true", help="also print the spectrum comparison when using --emit")
    p.set_defaults(func=cmd_block_encode)

    p = sub.add_parser("poly", parents=[common], help="polynomial approximations")
    p.add_argument("action", choices=["fit", "show", "min-terms"])
    p.add_argument("--fn", default="tanh", help=f"target function ({', '.join(sorted(TARGETS))})")
    p.add_argument("--eps", type=float, nargs="+", help="target sup error (fit) or a list of errors (min-terms)")
    p.add_argument("--method", choices=["taylor", "chebyshev"], default="chebyshev")
    p.add_argument("--degree", type=int, help="fixed degree (Chebyshev) or number of terms (Taylor)")
    p.add_argument("--ref", default="x", help="polynomial reference for `show`")
    p.set_defaults(func=cmd_poly)

    p = sub.add_parser("qsvt", parents=[common], help="phase factors and block-vs-reference checks")
    p.add_argument("action", choices=["phases", "check"])
    p.add_argument("--poly", help="polynomial reference, JSON object or .json file")
    p.add_argument("--be", help="block-encoding JSON (from `block-encode --emit`)")
    p.add_argument("--phases", help="phase-factor JSON (from `qsvt phases`)")
    p.add_argument("--input", default="random:4", help=vec_help)
    p.add_argument("--kind", choices=["real", "imag"], default="real")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--degree-cap", type=int, default=DEFAULT_DEGREE_CAP)
    p.set_defaults(func=cmd_qsvt)

    p = sub.add_parser("ntca", parents=[common], help="run the amplitude transformation")
    p.add_argument("action", nargs="?", choices=["run"], default="run")
    p.add_argument("--config", help="experiment config file (overrides the other flags)")
    p.add_argument("--input", help=vec_help)
    p.add_argument("--poly-p", dest="poly_p", help="polynomial applied to the real parts")
    p.add_argument("--poly-q", dest="poly_q", help="polynomial applied to the imaginary parts")
    p.add_argument("--gamma", type=float)
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--variant", default="full", help="full, partial:N1 or real")
    p.add_argument("--amplify", choices=amp, default="none")
    p.add_argument("--no-ledger", action="store_true", help="skip the per-term error ledger")
    p.set_defaults(func=cmd_ntca)

    p = sub.add_parser("qnn", parents=[common], help="evaluate a layered amplitude network")
    p.add_argument("action", nargs="?", choices=["run"], default="run")
    p.add_argument("--config", help="experiment config file (overrides the other flags)")
    p.add_argument("--input", help=vec_help)
    p.add_argument("--layers", help="JSON file holding a list of layer objects")
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--amplify", choices=amp, default="none")
    p.add_argument("--readout", default="none", help="none or estimate:BETA")
    p.add_argument("--mode", choices=["exact", "sampled", "statevector"], default="exact")
    p.set_defaults(func=cmd_qnn)

    p = sub.add_parser("sweep", parents=[common], help="query-count scaling table (CSV)")
    p.add_argument("--N", type=int, nargs="+", default=[2, 4, 8])
    p.add_argument("--d", type=int, nargs="+", default=[1])
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--family", choices=["power", "zero"], default="power")
    p.add_argument("--amplify", choices=["auto", "repeat"], default="auto")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report", help="also write the JSON report (with fitted exponents) here")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DenseCapError, NormalizationError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NtcaError as exc:
        print(f"numerical contract violated: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
