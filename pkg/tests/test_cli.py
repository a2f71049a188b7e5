import json
import shutil
import subprocess

import pytest

from conftest import FIX_A, intro_instance, triangle
from seqauction import cli
from seqauction import sequential_game as sg


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    report = json.loads(out.out) if out.out.strip() else None
    return code, report, out.err


def paid(rep):
    return {r["winner"]: r["price"] for r in rep["result"]["trace"]["rounds"]}


@pytest.fixture
def files(tmp_path):
    tri = triangle()
    return {
        "fixA": write(tmp_path, "fixA.json", [[str(x) for x in row] for row in FIX_A]),
        "intro": write(tmp_path, "intro.json", intro_instance().to_json()),
        "tri": write(tmp_path, "tri.json", tri.matroid.to_json(tri.w)),
        "dir": tmp_path,
    }


def test_tau(capsys, files):
    code, rep, err = run(capsys, "tau", files["fixA"])
    assert code == 0 and rep["result"]["tau"] == ["3", "3", "2"]
    assert rep["schema_version"] == cli.SCHEMA_VERSION and "PASS" in err


def test_solve_stage_and_enumerate(capsys, files):
    code, rep, _ = run(capsys, "solve-stage", files["fixA"])
    assert code == 0 and rep["result"]["winner"] == 0 and rep["result"]["price"] == "3"
    code, rep, _ = run(capsys, "solve-stage", files["fixA"], "--policy", "ascending", "--epsilon", "1/2")
    assert code == 0
    code, rep, _ = run(capsys, "enumerate", files["fixA"], "--fixed-tie-break")
    assert code == 0 and rep["result"]


def test_solve_seq_intro(capsys, files):
    code, rep, _ = run(capsys, "solve-seq", files["intro"])
    assert code == 0
    assert rep["result"]["welfare"] == "9" and rep["result"]["opt"] == "10"


def test_scenario_figure1(capsys):
    code, rep, err = run(capsys, "scenario", "figure1", "--alpha", "1", "--eps", "1/100", "--check")
    assert code == 0 and rep["result"]["expected"]["poa"] == "299/201" and "PASS" in err


def test_scenario_nonexistence_exits_3(capsys):
    code, rep, err = run(capsys, "scenario", "multi_item_nonexistence", "--check", "--grid", "1/100")
    assert code == 3 and "NO_PURE_EQUILIBRIUM" in err
    assert rep["checks"]["walrasian"] is True


def test_emit_verify_round_trip(capsys, files):
    inst_p, prof_p = str(files["dir"] / "f1.json"), str(files["dir"] / "f1p.json")
    code, _, _ = run(capsys, "scenario", "figure1", "--emit", inst_p, prof_p)
    assert code == 0
    with open(inst_p) as f:
        emitted = json.load(f)
    assert sg.instance_from_json(emitted).to_json() == emitted
    code, rep, _ = run(capsys, "verify", inst_p, prof_p)
    assert code == 0
    code, rep, _ = run(capsys, "solve-seq", inst_p)
    assert code == 0 and rep["result"]["welfare"] == "201/100"


def test_verify_rejects_bad_profile(capsys, files):
    bad = write(files["dir"], "bad.json", {"format": "markov", "bids": {"": ["5", "0"]}})
    assert run(capsys, "verify", files["intro"], bad)[0] == 1
    short = write(files["dir"], "short.json", {"bids": {"": ["5"]}})
    assert run(capsys, "verify", files["intro"], short)[0] == 1
    overbid = write(
        files["dir"],
        "over.json",
        {"format": "first", "bids": {"": ["9", "0"], "0": ["9", "0"], "1": ["9", "0"]}},
    )
    code, rep, _ = run(capsys, "verify", files["intro"], overbid)
    assert code == 2 and rep["status"] == "FAIL"


def test_matroid_commands(capsys, files):
    code, rep, _ = run(capsys, "matroid", "run", files["tri"])
    assert code == 0 and paid(rep) == {"e1": "2", "e2": "2"}
    code, rep, _ = run(capsys, "matroid", "vcg", files["tri"])
    assert code == 0 and rep["result"]["vcg"] == {"e1": "2", "e2": "2", "e3": "inf"}
    code, rep, _ = run(capsys, "matroid", "greedy", files["tri"])
    assert code == 0 and rep["result"]["opt_weight"] == "8"
    code, rep, _ = run(capsys, "matroid", "run", files["tri"], "--mode", "procurement")
    assert code == 0 and paid(rep) == {"e2": "5", "e3": "5"}


@pytest.mark.parametrize("kind,bound", [("unit_demand", "2"), ("additive", "1"), ("matroid", None)])
def test_sweeps_pass(capsys, kind, bound):
    argv = ["sweep", kind, "--count", "8", "--seed", "3", "--jobs", "1"]
    if bound:
        argv += ["--bound", bound]
    code, rep, _ = run(capsys, *argv)
    assert code == 0 and rep["status"] == "PASS"


def test_sweep_violated_bound_exits_2(capsys):
    code, rep, _ = run(capsys, "sweep", "unit_demand", "--count", "30", "--seed", "0", "--bound", "1", "--jobs", "1")
    assert code == 2 and rep["status"] == "FAIL"


def test_report_file_and_determinism(capsys, files):
    out1, out2 = files["dir"] / "r1.json", files["dir"] / "r2.json"
    for out in (out1, out2):
        assert cli.main(["--report", str(out), "sweep", "additive", "--count", "5", "--seed", "9"]) == 0
    capsys.readouterr()
    a, b = json.loads(out1.read_text()), json.loads(out2.read_text())
    assert (a["result"], a["checks"], a["status"]) == (b["result"], b["checks"], b["status"])


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["tau", "/nonexistent/file.json"],
        ["scenario", "nope"],
        ["scenario", "figure1", "--t", "3"],
        ["sweep", "bogus"],
    ],
)
def test_usage_errors_exit_1(capsys, argv):
    assert cli.main(argv) == 1


def test_malformed_json_reports_location(capsys, files):
    p = write(files["dir"], "broken.json", '[[1, 2],\n [3, ]')
    assert cli.main(["tau", p]) == 1
    assert "line 2" in capsys.readouterr().err


def test_state_cap_is_usage_error(capsys, files):
    assert cli.main(["solve-seq", files["intro"], "--max-states", "1"]) == 1


@pytest.mark.skipif(shutil.which("seqauction") is None, reason="console script not installed")
def test_console_script(files):
    proc = subprocess.run(["seqauction", "tau", files["fixA"]], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["result"]["tau"] == ["3", "3", "2"]
