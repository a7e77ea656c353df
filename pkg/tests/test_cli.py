import csv
import io
import json
import os
import subprocess
import sys

import pytest

from einstein_limits.cli import main, to_json


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_curvature_kasner(tmp_path, capsys):
    path = tmp_path / "k.json"
    code, _, _ = run(["curvature", "--metric", "kasner", "--p", "2/3,2/3,-1/3", "--out", str(path)], capsys)
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["schema"] == 1
    assert doc["ricci_max_abs"] == 0
    assert doc["curvature_norm"]["value"] > 0


def test_curvature_minkowski_is_flat(capsys):
    code, out, _ = run(["curvature", "--metric", "minkowski"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["ricci_max_abs"] == 0 and doc["curvature_norm"]["value"] == 0


def test_curvature_bad_exponents(capsys):
    code, _, err = run(["curvature", "--metric", "kasner", "--p", "1/2,1/2,0"], capsys)
    assert code == 2
    assert "sum p^2 = 1/2" in err


def test_curvature_from_metric_file(tmp_path, capsys):
    f = tmp_path / "m.txt"
    f.write_text("chart: t x\npositive: t\ng[t,t] = -1\ng[x,x] = t^2\n")
    code, out, _ = run(["curvature", "--metric", str(f)], capsys)
    assert code == 0
    assert json.loads(out)["ricci_max_abs"] == 0


def test_computation_error_exit_code(tmp_path, capsys):
    f = tmp_path / "bad.txt"
    f.write_text("chart: t x\npositive: t\nrange: t 0.5 2\ng[t,t] = -1\ng[x,x] = log(t - 5)^2 + 1\n")
    code, _, err = run(["curvature", "--metric", str(f)], capsys)
    assert code == 3
    assert "computation failed" in err


@pytest.mark.parametrize("suite", ["erratum", "kasner", "kasner-pullback", "lefloch", "constraints", "crossval", "proper-time"])
def test_verify_suites_pass(suite, capsys):
    code, out, _ = run(["verify", "--suite", suite], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["passed"] is True
    assert all(c["mode"] in ("symbolic", "numeric") for g in doc["suites"] for c in g["checks"])


def test_verify_erratum_reports_zero_scalar(capsys):
    _, out, _ = run(["verify", "--suite", "erratum"], capsys)
    checks = {c["name"]: c for c in json.loads(out)["suites"][0]["checks"]}
    assert checks["scalar_curvature"]["passed"] and checks["scalar_curvature"]["residual"] == 0


def test_verify_suite_metric_mismatch(capsys):
    code, _, err = run(["verify", "--suite", "erratum", "--metric", "kasner"], capsys)
    assert code == 2
    assert "erratum" in err


def test_symbolic_mode_does_not_fall_back(capsys):
    args = ["verify", "--suite", "erratum", "--K", "2", "--CU", "0.3", "--Cinf", "1"]
    code, out, _ = run(args, capsys)
    assert code == 0
    assert "numeric" in out
    code, _, _ = run(args + ["--mode", "symbolic"], capsys)
    assert code == 1


def test_converge_writes_csv_and_json(tmp_path, capsys):
    stem = tmp_path / "conv.json"
    code, _, _ = run(["converge", "--Gprofile", "cos(theta)", "--grid", "5", "--out", str(stem)], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO((tmp_path / "conv.csv").read_text())))
    assert rows[0] == ["t_i", "j", "sup_distance"]
    assert len(rows) == 5
    doc = json.loads(stem.read_text())
    assert doc["fit"]["slope"] == pytest.approx(-0.75, abs=0.05)
    assert doc["grid"]["points_per_axis"] == 5


def test_converge_polarised_distances_are_zero(capsys):
    code, out, _ = run(["converge", "--grid", "5"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t_i,j,sup_distance"
    assert [ln.split(",")[2] for ln in lines[1:5]] == ["0"] * 4


@pytest.mark.parametrize(
    "args",
    [
        ["converge", "--ti", "100"],
        ["converge", "--ti", "1e4,1e2,1e6,1e8"],
        ["converge", "--metric", "kasner"],
        ["converge", "--K", "0"],
        ["converge", "--Lprofile", "sin("],
        ["curvature", "--metric", "nosuchfamily"],
    ],
)
def test_config_errors(args, capsys):
    assert run(args, capsys)[0] == 2


def test_argparse_errors_use_exit_two():
    with pytest.raises(SystemExit) as info:
        main(["verify", "--suite", "nonsense"])
    assert info.value.code == 2


def test_report_summarises_and_propagates_failure(tmp_path, capsys):
    good = tmp_path / "good.json"
    bad = tmp_path / "bad.json"
    run(["verify", "--suite", "lefloch", "--out", str(good)], capsys)
    run(["verify", "--suite", "erratum", "--K", "2", "--CU", "0.3", "--mode", "symbolic", "--out", str(bad)], capsys)
    code, out, _ = run(["report", str(good)], capsys)
    assert code == 0 and "PASS" in out
    code, out, _ = run(["report", str(good), str(bad)], capsys)
    assert code == 1 and "FAIL" in out
    assert run(["report"], capsys)[0] == 2
    assert run(["report", str(tmp_path / "missing.json")], capsys)[0] == 2


def test_reports_are_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        path = tmp_path / f"v{k}.json"
        run(["verify", "--suite", "constraints", "--out", str(path)], capsys)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_converge_is_identical_across_thread_counts(tmp_path):
    env = dict(os.environ)
    outs = []
    for threads in ("1", "4"):
        env["EINSTEIN_LIMITS_THREADS"] = threads
        stem = tmp_path / f"c{threads}"
        args = [sys.executable, "-m", "einstein_limits.cli", "converge", "--Gprofile", "cos(theta)",
                "--Lprofile", "1 + sin(theta)^2/10", "--grid", "4", "--out", str(stem)]
        subprocess.run(args, check=True, env=env)
        outs.append(((tmp_path / f"c{threads}.csv").read_bytes(), (tmp_path / f"c{threads}.json").read_bytes()))
    assert outs[0] == outs[1]


def test_json_number_format():
    text = to_json({"a": 0.1, "b": float("nan"), "c": [1, 2.5]})
    doc = json.loads(text)
    assert doc["a"] == 0.1 and doc["b"] is None
    assert "0.10000000000000001" in text
