import csv
import io
import json
import subprocess
import sys

import pytest

from cartanlab.checks import REPORT_SCHEMA, canonical_json, emit_report, run_check
from cartanlab.cli import main


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = main(args + ["--out", str(out)])
    return code, out.read_bytes() if out.exists() else b""


def test_json_report_is_byte_identical(tmp_path):
    args = ["equivalence", "--model", "schwarzschild-spherical", "--seed", "7"]
    code1, a = run(args, tmp_path, "a")
    code2, b = run(args, tmp_path, "b")
    assert code1 == code2 == 0 and a == b
    doc = json.loads(a)
    assert doc["schema"] == REPORT_SCHEMA
    assert doc["options"]["seed"] == 7
    assert {"signature", "orientation", "torsion", "source_sign"} <= set(doc["conventions"])
    assert list(doc) == sorted(doc)


def test_separate_processes_agree(tmp_path):
    cmd = [sys.executable, "-m", "cartanlab.cli", "torsion", "--model", "sphere-unit"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and a.endswith(b"\n")


def test_csv_summary_one_row_per_check(tmp_path):
    code, data = run(["curvature", "--model", "sphere-unit", "--format", "csv-summary"], tmp_path)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(data.decode())))
    report = run_check("sphere-unit", "curvature")
    assert [r["check"] for r in rows] == sorted(i.name for i in report.items)
    assert all(r["status"] in ("zero", "nonzero", "inconclusive") for r in rows)
    assert all(r["max_abs_residual"] != "" for r in rows)


def test_exit_codes(tmp_path, capsys):
    assert run(["nonmetricity", "--model", "schwarzschild-cartesian"], tmp_path)[0] == 0
    # the plus-sign strain relation is a required check that fails
    assert run(["strain", "--model", "sphere-unit"], tmp_path)[0] == 1
    assert main(["field-equations", "--model", "sphere-unit"]) == 2
    assert "4-dimensional" in capsys.readouterr().err
    assert main(["curvature", "--model", "nope"]) == 2
    assert main(["curvature", "--model", "sphere-unit", "--param", "m"]) == 2
    assert main(["no-such-check", "--model", "sphere-unit"]) == 2
    assert main([]) == 2


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CARTANLAB_SEED", "123")
    _, data = run(["einstein", "--model", "schwarzschild-spherical"], tmp_path, "a")
    assert json.loads(data)["options"]["seed"] == 123
    _, data = run(["einstein", "--model", "schwarzschild-spherical", "--seed", "5"], tmp_path, "b")
    assert json.loads(data)["options"]["seed"] == 5
    monkeypatch.setenv("CARTANLAB_SEED", "abc")
    assert main(["einstein", "--model", "schwarzschild-spherical"]) == 2


def test_models_listing(capsys):
    assert main(["models"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split("\t")[0] for line in lines][:2] == ["conformal-test", "minkowski-cartesian"]
    assert len(lines) == 5


@pytest.mark.parametrize("conn", ["lc", "nunes"])
def test_transport_command_writes_trace(tmp_path, conn):
    trace = tmp_path / "t.csv"
    code, data = run(["transport", "--model", "sphere-unit", "--connection", conn,
                      "--path", "latitude:pi/3", "--steps", "256", "--trace", str(trace)], tmp_path)
    assert code == 0
    summary = json.loads(data)
    assert summary["metadata"]["steps"] == 256
    rows = list(csv.reader(open(trace)))
    assert len(rows) == 258
    if conn == "nunes":
        assert summary["final"] == [1, 0]
    else:
        assert abs(summary["final"][0] + 1) < 1e-9


@pytest.mark.parametrize("path", ["polyline:1,0;1.2,0.5;0.8,1", "curve:1+s/2,s@0:1",
                                  "geodesic:1,0:0.2,1:2"])
def test_transport_path_kinds(tmp_path, path):
    code, data = run(["transport", "--model", "sphere-unit", "--path", path, "--steps", "200",
                      "--v0", "0.6,0.8"], tmp_path)
    assert code == 0
    assert json.loads(data)["norm_drift"] < 1e-9


def test_transport_bad_path(tmp_path):
    assert main(["transport", "--model", "sphere-unit", "--path", "spiral:1"]) == 2
    assert main(["transport", "--model", "sphere-unit", "--path", "polyline:1,0;4,0"]) == 2


def test_canonical_json_rules():
    text = canonical_json({"b": 0.1, "a": [float("nan"), 1, True, None], "c": {"z": 1e-20}})
    assert text == '{"a": [null, 1, true, null], "b": 0.10000000000000001, "c": {"z": 9.9999999999999995e-21}}'


def test_unknown_format_rejected():
    rep = run_check("sphere-unit", "torsion")
    with pytest.raises(ValueError):
        emit_report(rep, "xml")
