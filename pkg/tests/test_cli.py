import json
import subprocess
import sys

import pytest

from ccmckp.cli import main


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path, capsys):
    inst = tmp_path / "i.json"
    code, _, _ = run(["gen", "--family", "LAB", "--m", "3", "--N", "3", "--L", "10",
                      "--W", "12", "--seed", "1", "--out", str(inst)], capsys)
    assert code == 0
    return inst, tmp_path / "i.json.truth.json"


def test_gen_solve_eval_round_trip(files, tmp_path, capsys):
    inst, truth = files
    sol = tmp_path / "s.json"
    code, out, _ = run(["solve", "--instance", str(inst), "--truth", str(truth),
                        "--rcl-draws", "10000", "--max-iter", "5", "--out", str(sol)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert {"picks", "cost", "ECL", "ET", "RCL"} <= set(doc)
    assert json.loads(sol.read_text()) == {"picks": doc["picks"]}
    code, out, _ = run(["eval", "--instance", str(inst), "--solution", str(sol),
                        "--brute"], capsys)
    assert code == 0
    ev = json.loads(out)
    assert ev["confidence"] == pytest.approx(ev["brute"]["confidence"])
    assert (ev["verdict"] == "Feasible") == ev["brute"]["feasible"]


@pytest.mark.parametrize("alg", ["greedy", "ga", "eda", "gauss"])
def test_solve_algorithms(alg, files, capsys):
    inst, _ = files
    code, out, _ = run(["solve", "--instance", str(inst), "--algorithm", alg,
                        "--budget", "30", "--max-iter", "3"], capsys)
    assert code == 0 and json.loads(out)["algorithm"] == alg


def test_experiment_and_probe(files, capsys):
    inst, truth = files
    code, out, _ = run(["experiment", "--instance", str(inst), "--truth", str(truth),
                        "--reps", "2", "--rcl-draws", "1000", "--max-iter", "3",
                        "--algorithms", "ddals,greedy"], capsys)
    assert code == 0 and out.startswith("# benchmark=")
    code, out, _ = run(["probe-amc", "--instance", str(inst), "--n", "5",
                        "--mc-draws", "100"], capsys)
    assert code == 0 and out.splitlines()[0].startswith("method,")


def test_preset_source(capsys):
    code, out, _ = run(["solve", "--preset", "LAB-ss1-W14", "--max-iter", "2",
                        "--algorithm", "greedy"], capsys)
    assert code == 0 and len(json.loads(out)["picks"]) == 3


@pytest.mark.parametrize("args,kind,code", [
    (["solve"], "usage", 2),
    (["solve", "--preset", "LAB-zz-W1"], "unknown-preset", 2),
    (["eval", "--instance", "/nonexistent.json", "--solution", "x"], None, 1),
    (["gen", "--family", "LAB"], "usage", 2),
])
def test_errors_are_machine_readable(args, kind, code, capsys):
    got, _, err = run(args, capsys)
    assert got == code
    doc = json.loads(err.strip().splitlines()[-1])
    assert "message" in doc
    if kind:
        assert doc["error"] == kind


def test_experiment_without_truth(files, capsys):
    inst, _ = files
    code, _, err = run(["experiment", "--instance", str(inst)], capsys)
    assert code == 2 and json.loads(err)["error"] == "missing-truth"


def test_bad_instance_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"m": 1}')
    code, _, err = run(["eval", "--instance", str(p), "--solution", str(p)], capsys)
    assert code == 2 and "error" in json.loads(err)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ccmckp", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
