import json
import subprocess
import sys

import pytest

from payload_stl.cli import main


@pytest.fixture
def reach_file(tmp_path):
    path = tmp_path / "reach.json"
    path.write_text(json.dumps({"spec": "F[0,3](ball(r0, [1,0,0]) <= 0.5)", "duration": 3}))
    return path


def test_run_then_monitor(tmp_path, reach_file, capsys):
    out = tmp_path / "out"
    assert main(["run", str(reach_file), "--out", str(out), "--seed", "3"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert (out / "report.json").exists() and (out / "barrier.svg").exists()

    csv = str(out / "trajectory.csv")
    assert main(["monitor", csv, "F[0,3](ball(r0, [1,0,0]) <= 0.5)"]) == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["satisfied"] and verdict["robustness"] > 0
    assert main(["monitor", csv, "G[0,3](ball(r0, [0,0,0]) <= 0.2)"]) == 1

    spec_file = tmp_path / "spec.txt"
    spec_file.write_text("F[0,2](true)")
    assert main(["monitor", csv, str(spec_file)]) == 0


def test_failing_run_exits_one(tmp_path, capsys):
    path = tmp_path / "far.json"
    path.write_text(json.dumps({"spec": "F[0,1](ball(r0, [30,0,0]) <= 0.1)", "duration": 1}))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_check_preset(capsys):
    assert main(["check", "--preset", "package_delivery"]) == 0
    out = capsys.readouterr().out
    assert "atom 11" in out and "b(x0, 0) = 2" in out


def test_bad_input_exits_two(tmp_path, capsys):
    empty = tmp_path / "empty.json"
    empty.write_text("")
    assert main(["check", str(empty)]) == 2
    assert main(["run"]) == 2
    assert main(["check", str(tmp_path / "missing.json")]) == 2
    assert main(["monitor", str(empty), "F[0,1](true"]) == 2
    assert "error" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "payload_stl", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "monitor" in res.stdout
