import csv
import io
import json

import numpy as np
import pytest

from ntca.cli import main
from ntca.errors import ConfigError
from ntca.experiment import (
    EXIT_CONFIG, EXIT_CONTRACT, EXIT_OK, deterministic_view, execute, run_experiment, scaling_sweep, validate_config,
)


def cfg(task, **payload):
    key = {"BLOCK_ENCODE": "block_encode", "QSVT_CHECK": "qsvt_check", "NTCA": "ntca", "QNN": "qnn",
           "SCALING_SWEEP": "sweep"}[task]
    return {"schema_version": "1.0", "seed": 0, "task": task, key: payload}


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_block_encode_basis_spectrum():
    report, _ = execute(cfg("BLOCK_ENCODE", vector=[1, 0], kind="real"))
    assert report.ok
    assert sorted(report.result["real"]["spectrum"]) == pytest.approx([0.0, 1.0], abs=1e-9)
    assert report.counters["queries_real"] == 4


def test_ntca_identity_reports_unit_fidelity():
    report, _ = execute(cfg("NTCA", vector={"random": {"N": 4, "real": True}}, P="x"))
    assert report.ok
    assert report.result["fidelity_vs_target"] == pytest.approx(1, abs=1e-10)


def test_schema_rejects_unknown_fields():
    bad = cfg("NTCA", vector=[1, 0], P="x")
    bad["extra"] = 1
    with pytest.raises(ConfigError):
        validate_config(bad)
    with pytest.raises(ConfigError):
        validate_config({**cfg("NTCA", vector=[1, 0], P="x"), "schema_version": "0.9"})
    with pytest.raises(ConfigError):
        validate_config({"schema_version": "1.0", "seed": 0, "task": "NTCA"})
    with pytest.raises(ConfigError):
        validate_config(cfg("NTCA", vector=[1, 0], P="x", colour="blue"))


def test_report_is_deterministic(tmp_path):
    c = cfg("NTCA", vector={"random": {"N": 4}}, P="tanhpoly:3", Q="tanhpoly:3", amplification="amplitude_amplify",
            ledger=True)
    a = run_experiment(c, tmp_path / "a.json")
    b = run_experiment(c, tmp_path / "b.json")
    assert json.dumps(deterministic_view(a.to_json()), sort_keys=True) == \
        json.dumps(deterministic_view(b.to_json()), sort_keys=True)
    doc = json.loads((tmp_path / "a.json").read_text())
    assert {"versions", "timings", "counters", "assertions"} <= set(doc)


def test_sweep_monotone_in_N():
    res = scaling_sweep([2, 4, 8], [1], 1e-2, "power", "amplitude_amplify", 0, 1, None)
    q = [r["expected_queries"] for r in res.rows]
    assert q == sorted(q)
    for a, b in zip(q, q[1:]):
        assert np.sqrt(2) * 0.75 <= b / a <= np.sqrt(2) * 1.25


def test_sweep_zero_target_recorded():
    res = scaling_sweep([2], [1], 1e-2, "zero", "amplitude_amplify", 0, 1, None)
    assert res.rows[0]["status"] == "UNAMPLIFIABLE"


def test_sweep_workers_do_not_change_rows():
    a = scaling_sweep([2, 4], [1, 2], 1e-2, "power", "amplitude_amplify", 0, 1, None)
    b = scaling_sweep([2, 4], [1, 2], 1e-2, "power", "amplitude_amplify", 0, 2, None)
    assert a.to_csv() == b.to_csv()


def test_cli_block_encode_round_trip(tmp_path, capsys):
    vec = tmp_path / "v.json"
    vec.write_text("[[0.6, 0], [0, 0.8]]")
    be = tmp_path / "be.json"
    code, out, _ = run_cli(capsys, "block-encode", "--input", vec, "--kind", "real", "--emit", be, "--check")
    assert code == EXIT_OK and json.loads(out)["ok"]
    ph = tmp_path / "ph.json"
    assert run_cli(capsys, "qsvt", "phases", "--poly", "T:3", "--emit", ph)[0] == EXIT_OK
    code, out, _ = run_cli(capsys, "qsvt", "check", "--be", be, "--phases", ph)
    doc = json.loads(out)
    assert code == EXIT_OK and doc["ok"] and doc["queries"] == 12


def test_cli_poly_fit(capsys):
    code, out, _ = run_cli(capsys, "poly", "fit", "--fn", "tanh", "--eps", "1e-3", "--method", "taylor")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["certified_error"] <= 1e-3
    code, out, _ = run_cli(capsys, "poly", "fit", "--fn", "sin", "--eps", "1e-6")
    assert code == EXIT_OK and json.loads(out)["certified_error"] <= 1e-6
    assert run_cli(capsys, "poly", "fit", "--fn", "nope", "--eps", "1e-3")[0] == EXIT_CONFIG


def test_cli_ntca_run_with_ledger(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = run_cli(capsys, "ntca", "run", "--input", "random:4", "--poly-p", "tanhpoly:3",
                         "--poly-q", "tanhpoly:3", "--eps", "1e-2", "--variant", "full", "--amplify", "auto",
                         "--emit", out)
    doc = json.loads(out.read_text())
    assert code == EXIT_OK and doc["ok"]
    assert doc["result"]["ledger"]["ok"]
    assert doc["counters"]["queries_per_invocation"] == 2 * (4 * 5 + 4)


def test_cli_variants(capsys):
    code, out, _ = run_cli(capsys, "ntca", "run", "--input", "random:4", "--poly-p", "x", "--variant", "partial:2")
    assert code == EXIT_OK
    code, out, _ = run_cli(capsys, "ntca", "run", "--input", "random:4:real", "--poly-p", "x", "--variant", "real")
    assert code == EXIT_OK and json.loads(out)["result"]["flags"] == 3
    assert run_cli(capsys, "ntca", "run", "--input", "random:4", "--poly-p", "x", "--variant", "bogus")[0] == \
        EXIT_CONFIG


def test_cli_exit_codes(tmp_path, capsys):
    assert run_cli(capsys, "ntca", "run", "--input", "[0, 0]", "--poly-p", "x")[0] == EXIT_CONFIG
    assert run_cli(capsys, "ntca", "run", "--input", "random:2", "--poly-p", "0")[0] == EXIT_CONTRACT
    assert run_cli(capsys, "ntca", "run", "--input", "random:4", "--poly-p", "tanh:5")[0] == EXIT_CONTRACT
    assert run_cli(capsys, "run", tmp_path / "missing.json")[0] == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": "1.0", "task": "NTCA", "ntca": {"vector": [1, 0], "P": "x"},
                               "unknown": True}))
    assert run_cli(capsys, "run", bad)[0] == EXIT_CONFIG
    assert run_cli(capsys, "block-encode", "--input", "random:16", "--dense-cap", "6")[0] == EXIT_CONFIG


def test_cli_run_config_with_relative_vector(tmp_path, capsys):
    (tmp_path / "vec.json").write_text("[0.6, 0.8]")
    conf = tmp_path / "exp.json"
    conf.write_text(json.dumps(cfg("NTCA", vector={"path": "vec.json"}, P="x")))
    code, out, _ = run_cli(capsys, "run", conf)
    assert code == EXIT_OK and json.loads(out)["ok"]


def test_cli_qnn(tmp_path, capsys):
    layers = tmp_path / "layers.json"
    layers.write_text(json.dumps([{"V": {"permutation": [1, 0]}, "P": "x2", "real": True}]))
    code, out, _ = run_cli(capsys, "qnn", "run", "--input", "[0.6, 0.8]", "--layers", layers,
                           "--readout", "estimate:0.05")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["ok"]
    assert np.allclose(np.array(doc["result"]["output"])[:, 0], [0.64, 0.36], atol=1e-9)


def test_cli_sweep_csv(tmp_path, capsys):
    rep = tmp_path / "rep.json"
    code, out, _ = run_cli(capsys, "sweep", "--N", "2", "4", "8", "--d", "1", "--report", rep)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == EXIT_OK and [int(r["N"]) for r in rows] == [2, 4, 8]
    q = [float(r["expected_queries"]) for r in rows]
    assert q == sorted(q)
    assert json.loads(rep.read_text())["ok"]
    code, out, _ = run_cli(capsys, "sweep", "--N", "2", "--family", "zero")
    assert code == EXIT_OK and "UNAMPLIFIABLE" in out


def test_log_level_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("NTCA_LOG_LEVEL", "debug")
    assert run_cli(capsys, "poly", "min-terms")[0] == EXIT_OK
