import csv
import json
import struct

import pytest

from beclab import cli
from beclab.cache import VERSION
from beclab.properties import PropertyResult

SMALL = """
[model]
L = 5.0
n = 25
[sweep]
N = 2, 3
beta = 0.0, 0.5
t = 0.5
[sde]
dt = 0.005
T = 0.5
M = 300
records = 10
"""

OSCILLATOR = """
[model]
L = 8.0
n = 513
[potentials]
pair = zero
nls_coupling = 0
"""


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL)
    return path


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_record(err):
    return json.loads(err.strip().splitlines()[-1])


def test_oscillator_table(tmp_path, capsys):
    cfg = tmp_path / "osc.ini"
    cfg.write_text(OSCILLATOR)
    code, out, _ = run(capsys, "solve-nls", "--config", cfg, "--out", tmp_path / "o",
                       "--cache", tmp_path / "c")
    assert code == 0
    row = next(line for line in out.splitlines() if line.startswith("E "))
    assert abs(float(row.split()[1]) - 1.0) < 1e-6
    doc = json.loads((tmp_path / "o" / "nls.json").read_text())
    assert abs(doc["mu"] - 1.0) < 1e-5 and doc["g"] == 0.0


def test_nbody_and_scattering(small, tmp_path, capsys):
    code, out, _ = run(capsys, "solve-nbody", "--config", small, "--out", tmp_path / "o",
                       "--N", 2, "--beta", 0.5, "--cache", tmp_path / "c")
    assert code == 0 and "E_N/N" in out
    doc = json.loads((tmp_path / "o" / "nbody_N2_beta0.5.json").read_text())
    assert doc["N"] == 2 and doc["beta"] == 0.5
    code, out, _ = run(capsys, "scattering", "--config", small, "--out", tmp_path / "o")
    assert code == 0
    raw = (tmp_path / "o" / "scattering.csv").read_bytes()
    assert raw.startswith(b"N,a_N,4pi_a_N,g,gap\r\n")
    rows = list(csv.DictReader(raw.decode().splitlines()))
    assert [int(r["N"]) for r in rows] == [2, 8, 32, 128]
    gaps = [float(r["gap"]) for r in rows]
    assert all(g >= 0 for g in gaps) and gaps == sorted(gaps, reverse=True)


def test_simulate(small, tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--config", small, "--out", tmp_path / "o",
                       "--N", 2, "--cache", tmp_path / "c")
    assert code == 0
    summary = json.loads((tmp_path / "o" / "stationarity.json").read_text())
    assert summary["M"] == 300 and summary["tvFinal"] < 0.5
    head = (tmp_path / "o" / "ensemble.csv").read_bytes().split(b"\r\n")[0]
    assert head == b"trajectory,step,time,x0,x1"


def test_chaos_report(small, tmp_path, capsys):
    code, out, _ = run(capsys, "chaos-report", "--config", small, "--out", tmp_path / "o",
                       "--N", 3, "--beta", 0.5, "--t", 0.5, "--cache", tmp_path / "c")
    assert code == 0
    doc = json.loads((tmp_path / "o" / "chaos_N3_beta0.5.json").read_text())
    assert list(doc)[:10] == ["N", "beta", "t", "driftMismatch", "normalizedEntropy",
                              "kMarginalEntropy", "kMarginalTV", "fisherNormalized",
                              "kacMetric", "identityGap"]
    assert len(doc["kMarginalEntropy"]) == 2
    assert doc["kacMetric"] <= doc["diagnostics"]["kacBound"]


def test_sweep_is_deterministic(small, tmp_path, capsys):
    outputs = []
    for name, extra in (("o1", ["--no-cache"]), ("o2", ["--cache", tmp_path / "c"]),
                        ("o3", ["--cache", tmp_path / "c"]), ("o4", ["--no-cache", "--workers", 2])):
        code, out, _ = run(capsys, "sweep", "--config", small, "--out", tmp_path / name, *extra)
        assert code == 0
        outputs.append({p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())})
    assert len(list((tmp_path / "c").iterdir())) == 5  # nls plus four N-body states
    assert all(o == outputs[0] for o in outputs[1:])
    rows = list(csv.DictReader(outputs[0]["sweep.csv"].decode().splitlines()))
    assert len(rows) == 4 and all(r["kacBoundOK"] == "true" for r in rows)
    assert outputs[0]["sweep.csv"].count(b"\r\n") == 5


def test_corrupt_cache_entry_is_recomputed(small, tmp_path, capsys):
    args = ["solve-nbody", "--config", small, "--out", tmp_path / "o", "--cache", tmp_path / "c"]
    assert run(capsys, *args)[0] == 0
    first = (tmp_path / "o" / "nbody_N2_beta0.5.json").read_bytes()
    for entry in (tmp_path / "c").iterdir():
        entry.write_bytes(entry.read_bytes()[:-9])
    assert run(capsys, *args)[0] == 0
    assert (tmp_path / "o" / "nbody_N2_beta0.5.json").read_bytes() == first


def test_incompatible_cache_is_a_config_error(small, tmp_path, capsys):
    args = ["solve-nls", "--config", small, "--out", tmp_path / "o", "--cache", tmp_path / "c"]
    assert run(capsys, *args)[0] == 0
    for entry in (tmp_path / "c").iterdir():
        blob = bytearray(entry.read_bytes())
        struct.pack_into("<I", blob, 4, VERSION + 1)
        entry.write_bytes(bytes(blob))
    code, _, err = run(capsys, *args)
    assert code == 1 and error_record(err)["error"] == "cache"


@pytest.mark.parametrize("text", ["[model]\nn = 3\n", "[model]\nbogus = 1\n"])
def test_config_error_exit(tmp_path, capsys, text):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(text)
    code, _, err = run(capsys, "solve-nls", "--config", cfg, "--out", tmp_path / "o")
    assert code == 1
    rec = error_record(err)
    assert rec["exit_code"] == 1 and rec["error"] == "config" and rec["message"]


def test_missing_config_and_bad_flags(tmp_path, capsys):
    code, _, err = run(capsys, "solve-nls", "--config", tmp_path / "none.ini")
    assert code == 1 and error_record(err)["error"] == "config"
    code, _, err = run(capsys, "solve-nls", "--seed", "-4")
    assert code == 1 and error_record(err)["error"] == "usage"
    code, _, _ = run(capsys, "frobnicate")
    assert code == 1


def test_convergence_exit(tmp_path, capsys):
    cfg = tmp_path / "cap.ini"
    cfg.write_text("[solver]\nmax_iterations = 5\n")
    code, _, err = run(capsys, "solve-nls", "--config", cfg, "--no-cache", "--out", tmp_path)
    assert code == 2 and error_record(err)["error"] == "convergence"


def test_budget_exit(tmp_path, capsys):
    cfg = tmp_path / "budget.ini"
    cfg.write_text("[solver]\nbudget = 1000\n")
    code, _, err = run(capsys, "solve-nbody", "--config", cfg, "--no-cache", "--out", tmp_path)
    rec = error_record(err)
    assert code == 4 and rec["required"] == 49 ** 2 and rec["budget"] == 1000


def test_property_exit(small, tmp_path, capsys, monkeypatch):
    import beclab.properties as props
    monkeypatch.setattr(props, "run_all", lambda session, log: [
        PropertyResult("fine", True, ""), PropertyResult("broken", False, "x")])
    code, out, err = run(capsys, "verify", "--config", small, "--out", tmp_path)
    assert code == 3
    rec = error_record(err)
    assert rec["failed"] == ["broken"]
    assert "1 passed, 1 failed" in out


def test_verify_default_config(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--out", tmp_path / "o", "--cache", tmp_path / "c")
    assert code == 0, out
    results = json.loads((tmp_path / "o" / "verify.json").read_text())
    assert results and all(r["passed"] for r in results)
