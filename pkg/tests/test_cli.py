import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from walkqed import cli
from walkqed.circuit import build_walking_detection
from walkqed.estimator import FitDataset, generate_synthetic_dataset
from walkqed.gates import CZ
from walkqed.noise import NoiseModel
from walkqed.transpile import RULES
from walkqed.circuit import op


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_sweep_walking_noiseless(tmp_path):
    out = tmp_path / "s.csv"
    assert run("sweep", "--scheme", "walking", "--points", 21, "--noise", "none", "--out", out) == 0
    rows = read_csv(out)
    assert len(rows) == 21
    assert all(abs(float(r["z_log_corrected"]) - 1) <= 1e-9 for r in rows)


def test_sweep_static_three_points(tmp_path):
    out = tmp_path / "s.csv"
    assert run("sweep", "--scheme", "static", "--points", 3, "--out", out) == 0
    rows = read_csv(out)
    assert [float(r["epsilon"]) for r in rows] == pytest.approx([0, math.pi / 2, math.pi])
    assert [float(r["z_anc"]) for r in rows] == pytest.approx([1, 0, -1], abs=1e-12)


def test_sweep_missing_out_writes_nothing(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run("sweep", "--points", 3) == 2
    assert list(tmp_path.iterdir()) == []


def test_sweep_config_errors(tmp_path):
    out = tmp_path / "s.csv"
    assert run("sweep", "--points", 0, "--out", out) == 2
    assert run("sweep", "--shots", 0, "--out", out) == 2
    assert run("sweep", "--noise", tmp_path / "missing.json", "--out", out) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"delta_phi": 0.0, "p1": 3.0}))
    assert run("sweep", "--noise", bad, "--out", out) == 2
    assert run("sweep", "--out", tmp_path / "nodir" / "s.csv") == 2
    assert not out.exists()
    with pytest.raises(SystemExit) as exc:
        run("sweep", "--scheme", "ring", "--out", out)
    assert exc.value.code == 2


def test_sweep_with_noise_file_and_profile(tmp_path):
    noise = tmp_path / "noise.json"
    noise.write_text(NoiseModel.reference().to_json())
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("sweep", "--points", 5, "--noise", noise, "--out", a) == 0
    # the profile adds SPAM-corrected readout, which is transparent without shots
    assert run("sweep", "--points", 5, "--profile", "paper", "--out", b) == 0
    ra, rb = read_csv(a), read_csv(b)
    for x, y in zip(ra, rb):
        assert float(x["z_log_corrected"]) == pytest.approx(float(y["z_log_corrected"]), abs=1e-12)
    assert float(ra[0]["z_log_corrected"]) < 1


def test_tomo_theta_grid(tmp_path):
    out = tmp_path / "t.csv"
    assert run("tomo", "--grid", "theta", "--points", 25, "--out", out) == 0
    rows = [r for r in read_csv(out) if r["branch"] == "all"]
    assert len(rows) == 25
    for r in rows:
        assert abs(float(r["z_l"]) - math.cos(float(r["theta"]))) <= 1e-9
    assert {r["branch"] for r in read_csv(out)} == {"all", "plus", "minus"}


def test_tomo_device_profile_dropout(tmp_path):
    # expected to fail with the reference parameters (mean dropout is about 0.22)
    out = tmp_path / "t.csv"
    assert run("tomo", "--profile", "paper", "--out", out) == 0
    mean = np.mean([float(r["dropout"]) for r in read_csv(out)])
    assert 0.05 <= mean <= 0.15, f"mean dropout {mean:.4f}"


def test_tomo_is_byte_identical_on_rerun(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ("tomo", "--profile", "paper", "--shots", 400, "--seed", 3)
    assert run(*args, "--out", a) == 0
    assert run(*args, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    assert run("tomo", "--profile", "paper", "--shots", 400, "--seed", 4, "--out", c) == 0
    assert c.read_bytes() != a.read_bytes()


def test_tomo_phi_grid_and_missing_out(tmp_path):
    out = tmp_path / "t.csv"
    assert run("tomo", "--grid", "phi", "--points", 8, "--out", out) == 0
    rows = [r for r in read_csv(out) if r["branch"] == "all"]
    for r in rows:
        assert abs(float(r["x_l"]) - math.cos(float(r["phi"]))) <= 1e-9
    assert run("tomo") == 2


def test_fit_bundled_dataset_round_trip(tmp_path):
    out = tmp_path / "fit.json"
    assert run("fit", "--out", out) == 0
    result = json.loads(out.read_text())
    params = NoiseModel.from_dict(result["params"])
    truth = NoiseModel.reference()
    assert abs(params.delta_phi - truth.delta_phi) <= 0.005
    assert abs(params.theta - truth.theta) <= 0.02
    assert abs(params.p1 - truth.p1) <= 0.003 and abs(params.p2 - truth.p2) <= 0.003
    assert result["budget_exhausted"] is False


def test_fit_budget_one(capsys):
    assert run("fit", "--budget", 1) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["budget_exhausted"] is True and result["evaluations"] == 1


def test_fit_dataset_errors(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text('{"phi_grid": [0.0, ')
    assert run("fit", "--data", broken) == 2
    assert "not valid JSON" in capsys.readouterr().err
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"phi_grid": [0.0]}))
    assert run("fit", "--data", wrong) == 2
    assert run("fit", "--budget", 0) == 2


def test_fit_custom_dataset(tmp_path, capsys):
    data = tmp_path / "d.json"
    data.write_text(generate_synthetic_dataset(NoiseModel(), phi_points=4, theta_points=3).to_json())
    assert run("fit", "--data", data, "--budget", 30, "--tie") == 0
    result = json.loads(capsys.readouterr().out)
    assert result["params"]["p1"] == result["params"]["p2"]


def test_bundled_dataset_is_table3_data():
    data = cli.load_dataset(None)
    assert isinstance(data, FitDataset)
    fresh = generate_synthetic_dataset(NoiseModel.reference())
    assert np.allclose(data.phi_grid, fresh.phi_grid) and np.allclose(data.theta_grid, fresh.theta_grid)
    assert np.max(np.abs(data.values() - fresh.values())) <= 1e-12


@pytest.mark.parametrize("builder,count", [("walking", 4), ("static", 2)])
def test_transpile_builders(builder, count, capsys):
    assert run("transpile", "--builder", builder) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["metrics"]["cz_count"] == count


def test_transpile_circuit_file(tmp_path):
    src = tmp_path / "c.json"
    src.write_text(build_walking_detection(0.3).to_json())
    out = tmp_path / "native.json"
    assert run("transpile", src, "--out", out) == 0
    payload = json.loads(out.read_text())
    assert payload["metrics"]["cz_count"] == 4
    assert {m["gate"] for moment in payload["circuit"]["moments"] for m in moment} <= {"RX", "RZ", "CZ"}


def test_transpile_errors(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"qubits": 3, "moments": [[{"gate": "CNOT", "qubits": [0, 2]}]]}))
    assert run("transpile", bad) == 2
    assert "topology violation" in capsys.readouterr().err
    junk = tmp_path / "j.json"
    junk.write_text(json.dumps({"qubits": 3, "moments": [[{"gate": "FOO", "qubits": [0]}]]}))
    assert run("transpile", junk) == 2
    assert run("transpile") == 2
    assert run("transpile", junk, "--builder", "static") == 2


def test_verify_passes_by_default(capsys):
    assert run("verify") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and set(report["checks"]) == {
        "transpile_soundness",
        "scheme_equivalence",
        "makhlin_fusion",
    }


def test_verify_tolerance_floor(capsys):
    assert run("verify", "--tolerance", "1e-15") == 1
    report = json.loads(capsys.readouterr().out)
    assert "transpile_soundness" in report["failed"]
    assert run("verify", "--tolerance", "-1") == 2


def test_verify_detects_corrupted_rule(monkeypatch, capsys):
    monkeypatch.setitem(RULES, "CNOT", lambda o: [op(CZ, *o.qubits)])
    assert run("verify") == 1
    report = json.loads(capsys.readouterr().out)
    assert "transpile_soundness" in report["failed"]
    assert report["checks"]["transpile_soundness"]["passed"] is False


def test_console_entry_point(tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "walkqed.cli", "sweep", "--points", "2", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().startswith("epsilon,p00")
