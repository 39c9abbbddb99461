import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from polyadic.circuit import Circuit, cz, preset, rz, sx, to_text
from polyadic.cli import main, write_atomic
from polyadic.model import ModelSpec
from polyadic.simulator import distribution, tv_distance

FAST_XOR = """
name: fastxor
dataset: {source: gaussian_xor, per_center: 10, seed: 0}
test: {source: gaussian_xor, per_center: 50, seed: 1}
circuit: xor2q
class_map: {"0": "00", "1": "10"}
encoder: passthrough
training: {restarts: 2, max_iters: 30, seed: 0}
"""


@pytest.fixture(autouse=True)
def _outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("POLYADIC_OUTPUT_DIR", str(tmp_path / "out"))
    monkeypatch.chdir(tmp_path)


def read_csv(path):
    with open(path) as f:
        return list(csv.reader(f))


@pytest.fixture
def xor_model(tmp_path):
    cfg = tmp_path / "fastxor.yaml"
    cfg.write_text(FAST_XOR)
    assert main(["train", str(cfg)]) == 0
    return tmp_path / "out" / "fastxor.model.json"


def test_train_outputs(xor_model, capsys):
    out = xor_model.parent
    spec = ModelSpec.from_json(xor_model.read_text())
    assert spec.passthrough and spec.theta.shape == (4,)
    report = json.loads((out / "fastxor.report.json").read_text())
    assert len(report["restart_losses"]) == 2
    assert 0 <= report["test_accuracy"] <= 1
    trace = read_csv(out / "fastxor.trace.csv")
    assert trace[0] == ["restart", "seed", "iteration", "loss", "shots"]
    assert {r[0] for r in trace[1:]} == {"0", "1"}
    assert not list(out.glob("*.tmp"))


def test_train_bundled_iris_with_overrides(tmp_path, capsys):
    assert main(["train", "iris", "--restarts", "1", "-o", str(tmp_path / "ir")]) == 0
    text = capsys.readouterr().out
    assert "confusion matrix" in text and "300 shots, seed 2" in text
    assert (tmp_path / "ir.model.json").exists()


def test_train_errors(tmp_path, capsys):
    assert main(["train", "iris", "--restarts", "0"]) == 2
    assert main(["train", "no_such_config"]) == 2
    assert main(["train", "skin"]) == 2
    assert "not found" in capsys.readouterr().err


def test_eval(xor_model, tmp_path, capsys):
    assert main(["gen-data", "xor", "--per-center", "10", "--seed", "5", "-o", str(tmp_path / "x.csv")]) == 0
    assert main(["eval", str(xor_model), str(tmp_path / "x.csv")]) == 0
    assert "accuracy" in capsys.readouterr().out
    assert main(["eval", str(xor_model), str(tmp_path / "x.csv"), "--shots", "100"]) == 0
    (tmp_path / "other.csv").write_text("x0,x1,label\n0,0,zz\n")
    assert main(["eval", str(xor_model), str(tmp_path / "other.csv")]) == 2
    (tmp_path / "junk.json").write_text("{}")
    assert main(["eval", str(tmp_path / "junk.json"), str(tmp_path / "x.csv")]) == 2


def test_simulate(tmp_path, capsys):
    (tmp_path / "c.txt").write_text(to_text(preset("xor2q")))
    assert main(["simulate", "c.txt", "--inputs", "0.3,-0.7", "--params", "0.1,0.2,0.3,0.4"]) == 0
    rows = read_csv_text(capsys.readouterr().out)
    probs = [float(r[1]) for r in rows[1:]]
    np.testing.assert_allclose(probs, [0.0005018564449135873, 0.0011890045298813877,
                                       0.19331541441899033, 0.8049937246062123], atol=1e-12)
    assert main(["simulate", "c.txt", "--inputs", "0.3,-0.7", "--params", "0.1,0.2,0.3,0.4",
                 "--shots", "1000", "-o", "counts.csv"]) == 0
    rows = read_csv(tmp_path / "counts.csv")
    assert sum(int(r[1]) for r in rows[1:]) == 1000
    assert main(["simulate", "c.txt"]) == 2
    assert main(["simulate", "c.txt", "--inputs", "a,b"]) == 2
    assert main(["simulate", "missing.txt"]) == 2


def read_csv_text(text):
    return list(csv.reader(text.splitlines()))


def test_optimize(tmp_path):
    c = Circuit(2, (sx(0), sx(0), sx(0), sx(0), rz(1, 0.5), cz(0, 1), rz(0, 0.3)))
    (tmp_path / "c.txt").write_text(to_text(c))
    assert main(["optimize", "c.txt"]) == 0
    out = tmp_path / "out" / "c.opt.txt"
    from polyadic.circuit import from_text
    opt = from_text(out.read_text())
    assert tv_distance(distribution(opt), distribution(c)) < 1e-10
    report = json.loads((tmp_path / "out" / "c.opt.txt.json").read_text())
    assert report["pulses_after"] == {"one_qubit": 0, "two_qubit": 0}
    assert report["pulses_before"] == {"one_qubit": 4, "two_qubit": 1}


def test_translate(tmp_path):
    (tmp_path / "x.txt").write_text(to_text(preset("xor2q")))
    args = ["translate", "x.txt", "--inputs", "0.3,-0.7", "--params", "0.1,0.2,0.3,0.4"]
    assert main(args + ["--target", "cnot"]) == 0
    from polyadic.circuit import bind, from_text
    out = from_text((tmp_path / "out" / "x.cnot.txt").read_text())
    ref = bind(preset("xor2q"), [0.3, -0.7], [0.1, 0.2, 0.3, 0.4])
    assert tv_distance(distribution(out), distribution(ref)) < 1e-10
    assert not any(g.kind == "h" for g in out.gates)
    report = json.loads((tmp_path / "out" / "x.cnot.txt.json").read_text())
    assert report["pulses_before"] == report["pulses_after"]
    assert main(args + ["--target", "zz", "-o", "z.txt"]) == 0
    (tmp_path / "bare.txt").write_text(to_text(Circuit(2, (cz(0, 1),))))
    assert main(["translate", "bare.txt", "--target", "cnot"]) == 2


def test_gen_data(tmp_path):
    assert main(["gen-data", "synthetic4", "--n", "400", "--seed", "3"]) == 0
    rows = read_csv(tmp_path / "out" / "synthetic4.csv")
    assert len(rows) == 401 and rows[0] == ["x0", "x1", "label"]
    meta = json.loads((tmp_path / "out" / "synthetic4.csv.json").read_text())
    assert meta["seed"] == 3


def test_boundary(xor_model, tmp_path):
    assert main(["boundary", str(xor_model)]) == 0
    rows = read_csv(tmp_path / "out" / "boundary.csv")
    assert len(rows) == 1 + 200 * 200
    assert {r[2] for r in rows[1:]} <= {"0", "1"}
    xs = [float(r[0]) for r in rows[1:]]
    assert min(xs) == pytest.approx(-np.pi) and max(xs) == pytest.approx(np.pi)
    assert main(["boundary", str(xor_model), "--grid", "1", "--xlim", "0", "1",
                 "--ylim", "0", "1", "-o", "one.csv"]) == 0
    assert len(read_csv(tmp_path / "one.csv")) == 2
    assert main(["boundary", str(xor_model), "--grid", "0"]) == 2


def test_boundary_rejects_four_features(tmp_path):
    assert main(["train", "iris", "--restarts", "1", "-o", str(tmp_path / "ir")]) == 0
    assert main(["boundary", str(tmp_path / "ir.model.json")]) == 2


def test_write_atomic_leaves_no_partial_file(tmp_path, monkeypatch):
    target = tmp_path / "f.txt"
    write_atomic(target, "hello")
    assert target.read_text() == "hello"

    def fail(*args):
        raise OSError("disk full")

    monkeypatch.setattr("polyadic.cli.os.replace", fail)
    with pytest.raises(OSError):
        write_atomic(target, "new contents")
    assert target.read_text() == "hello"
    assert not list(tmp_path.glob("*.tmp"))


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "polyadic.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "boundary" in r.stdout
