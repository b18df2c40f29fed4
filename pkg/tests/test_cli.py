"""Command-line interface: subcommands, outputs, exit codes."""

import csv
import json

import pytest

from evcharge.cli import cli
from evcharge.model import load_instance


def run(args):
    return cli(args)


def gen_instance_file(tmp_path, name="inst.json", extra=()):
    path = tmp_path / name
    code = run(["gen", "--n", "8", "--horizon", "6", "--capacity", "1.0",
                "--rate", "0.1", "--seed", "3", "--out", str(path),
                *extra])
    assert code == 0
    return path


def test_gen_synthetic(tmp_path, capsys):
    path = gen_instance_file(tmp_path)
    inst = load_instance(str(path))
    assert len(inst.requests) == 8
    assert "wrote 8 requests" in capsys.readouterr().out


def test_gen_worst_case(tmp_path):
    path = tmp_path / "fixture.json"
    code = run(["gen", "--kind", "worst-case", "--capacity", "10",
                "--rate", "1.0", "--bounds", "1,2,2,2,0", "--t-prime", "5",
                "--out", str(path)])
    assert code == 0
    assert len(load_instance(str(path)).requests) == 10


def test_simulate_writes_rows(tmp_path):
    inst = gen_instance_file(tmp_path)
    out = tmp_path / "r.csv"
    code = run(["simulate", "--instance", str(inst), "--policies", "opa,uboa",
                "--trials", "3", "--seed", "7", "--out", str(out)])
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6  # trials x policies
    assert {r["policy"] for r in rows} == {"opa", "uboa"}


def test_oracle_reports_welfare(tmp_path, capsys):
    inst = gen_instance_file(tmp_path)
    capsys.readouterr()
    assert run(["oracle", "--instance", str(inst), "--epsilon", "0.05"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["welfare"] >= 0
    assert doc["epsilon"] == 0.05


def test_certify_round_trip_and_strict(tmp_path, capsys):
    inst = gen_instance_file(tmp_path)
    trace = tmp_path / "t.json"
    out = tmp_path / "r.csv"
    assert run(["simulate", "--instance", str(inst), "--trials", "1",
                "--out", str(out), "--trace", str(trace)]) == 0
    report_path = tmp_path / "report.json"
    code = run(["certify", "--trace", str(trace), "--out", str(report_path)])
    assert code == 0
    capsys.readouterr()
    report = json.loads(report_path.read_text())
    assert report["classification"] in ("CAPACITY_FREE", "CAPACITY_LIMITED")

    # tamper: charge a rejected EV (or double a committed allocation)
    doc = json.loads(trace.read_text())
    for e in doc["events"]:
        if e["allocation"]:
            e["allocation"][0][1] *= 2.0
            e["admitted"] = True
            break
    trace.write_text(json.dumps(doc))
    assert run(["certify", "--trace", str(trace)]) == 0  # report-only
    capsys.readouterr()
    assert run(["certify", "--trace", str(trace), "--strict"]) == 2


def test_sweep_row_count(tmp_path):
    out = tmp_path / "sweep.csv"
    code = run(["sweep", "--axis", "rho", "--grid", "2,4,8", "--n", "6",
                "--horizon", "6", "--capacity", "1.0", "--rate", "0.1",
                "--bounds", "1,2,1,2,0.5", "--policies", "opa",
                "--trials", "1", "--out", str(out)])
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert [r["value"] for r in rows] == ["2.0", "4.0", "8.0"]


def test_congestion_csv(tmp_path):
    inst = gen_instance_file(tmp_path)
    out = tmp_path / "cdf.csv"
    code = run(["congestion", "--instance", str(inst), "--levels", "0.6,0.3",
                "--policies", "opa,pboa", "--trials", "2", "--out", str(out)])
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 8


def test_usage_errors_exit_one(tmp_path, capsys):
    assert run(["frobnicate"]) == 1
    assert run(["simulate"]) == 1  # missing required flags
    assert run(["simulate", "--instance", "x.json", "--policies", "nope",
                "--out", "y.csv"]) == 1
    capsys.readouterr()


def test_missing_instance_file_exit_one(tmp_path, capsys):
    assert run(["oracle", "--instance", str(tmp_path / "missing.json")]) == 1
    err = capsys.readouterr().err
    assert "error" in err
