import json
import subprocess
import sys

import numpy as np
import pytest

import _bench
from contourref import cli
from contourref.postprocess import ReferenceFile
from contourref.sysid import TrackingLog, read_gains

SMOOTH = str(_bench.CONFIGS / "smooth_spiral.yaml")


def _run(args, capsys=None):
    code = cli.main([str(a) for a in args])
    out = capsys.readouterr() if capsys else None
    return code, out


def test_version_and_help():
    r = subprocess.run([sys.executable, "-m", "contourref.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip().startswith("contourref ")
    with pytest.raises(SystemExit):
        cli.main(["--help"])


def test_synth_log_then_fit_recovers_gains(tmp_path, capsys):
    code, _ = _run(["synth-log", "--kp", 100, 100, "--kd", 10, 10, "--dt-s", 1e-3, "--out-dir", tmp_path / "s"], capsys)
    assert code == 0
    log = tmp_path / "s" / "tracking_log.csv"
    assert len(TrackingLog.read_csv(log)) == 2001
    code, out = _run(["fit", log, "--out-dir", tmp_path / "f"], capsys)
    assert code == 0 and "Kp" in out.out
    g = read_gains(tmp_path / "f" / "gains.txt")
    np.testing.assert_allclose(g.kp, 100, rtol=0.03)
    np.testing.assert_allclose(g.kd, 10, rtol=0.05)
    man = json.loads((tmp_path / "f" / "manifest.json").read_text())
    assert man["command"] == "fit" and man["argv"][:2] == ["contourref", "fit"]
    assert set(man["files"]) == {"fit_report.txt", "gains.txt"}


def test_synth_log_is_seed_deterministic(tmp_path):
    for d in ("a", "b"):
        assert _run(["synth-log", "--kp", 100, 100, "--kd", 10, 10, "--dt-s", 1e-3, "--duration-s", 0.2, "--seed", 7, "--out-dir", tmp_path / d])[0] == 0
    assert (tmp_path / "a" / "tracking_log.csv").read_bytes() == (tmp_path / "b" / "tracking_log.csv").read_bytes()


def test_default_run_directory_uses_env_root(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path))
    assert _run(["synth-log", "--kp", 100, 100, "--kd", 10, 10, "--dt-s", 1e-3, "--duration-s", 0.1])[0] == 0
    assert _run(["synth-log", "--kp", 100, 100, "--kd", 10, 10, "--dt-s", 1e-3, "--duration-s", 0.1])[0] == 0
    runs = sorted(p.name for p in tmp_path.iterdir())
    assert len(runs) == 2 and all(r.startswith("synth-log-seed0-") for r in runs)


@pytest.mark.parametrize(
    "setup, args, code",
    [
        (lambda d: (d / "e.csv").write_text(""), ["fit", "{d}/e.csv"], 2),
        (lambda d: None, ["fit", "{d}/missing.csv"], 4),
        (lambda d: None, ["optimize", SMOOTH, "--set", "bounds.tol_m=0"], 2),
        (lambda d: None, ["optimize", "{d}/missing.yaml"], 4),
        (lambda d: None, ["synth-log", "--kp", "1", "1"], 2),
    ],
)
def test_exit_codes(tmp_path, capsys, setup, args, code):
    setup(tmp_path)
    got, out = _run([a.format(d=tmp_path) for a in args] + ["--out-dir", tmp_path / "o"], capsys)
    assert got == code
    assert out.err


def test_unidentifiable_log_exits_2(tmp_path, capsys):
    m = 20
    z = np.zeros((m, 2))
    TrackingLog(np.arange(m) * 1e-3, z, z, z, z, z).write_csv(tmp_path / "z.csv")
    code, out = _run(["fit", tmp_path / "z.csv", "--out-dir", tmp_path / "o"], capsys)
    assert code == 2 and "zero" in out.err


@pytest.mark.slow
def test_optimize_writes_artifacts_and_is_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        code, out = _run(["optimize", SMOOTH, "--out-dir", tmp_path / d], capsys)
        assert code == 0 and "status optimal" in out.out
    a, b = tmp_path / "a", tmp_path / "b"
    expected = {
        "objective.csv", "contour.csv", "gains.txt", "solution.json", "reference.csv", "knot_metrics.csv", "knot_metrics.txt",
        "metrics.csv", "metrics.txt", "overlay.svg", "deviation.svg", "inputs.svg", "manifest.json",
    }
    assert expected <= {p.name for p in a.iterdir()}
    for name in expected - {"manifest.json", "metrics.txt", "knot_metrics.txt"}:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    man = json.loads((a / "manifest.json").read_text())
    assert man["status"] == "optimal" and len(man["config_hash"]) == 64
    ref = ReferenceFile.read_csv(a / "reference.csv")
    assert ref.dt == pytest.approx(1e-4)


@pytest.mark.slow
def test_simulate_reproduces_optimize_metrics(tmp_path, capsys):
    _run(["optimize", SMOOTH, "--no-plots", "--out-dir", tmp_path / "o"], capsys)
    code, out = _run(["simulate", tmp_path / "o" / "reference.csv", tmp_path / "o" / "gains.txt", "--out-dir", tmp_path / "s"], capsys)
    assert code == 0
    # same samples and same dense contour; only the CSV round trip of the reference differs
    sim, opt = (np.loadtxt(tmp_path / d / "metrics.csv", delimiter=",", skiprows=1) for d in ("s", "o"))
    np.testing.assert_allclose(sim, opt, rtol=1e-9)
    traj = np.loadtxt(tmp_path / "s" / "trajectory.csv", delimiter=",", skiprows=1)
    assert traj.shape[1] == 7


@pytest.mark.slow
def test_sweep_command(tmp_path, capsys):
    code, out = _run(["sweep", str(_bench.CONFIGS / "sharp_spiral.yaml"), "--tolerances-m", 1e-5, 4e-5, "--out-dir", tmp_path], capsys)
    assert code == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[1].startswith("1.00000000000000e-05")
    assert (tmp_path / "sweep.svg").exists()
    assert len(list(tmp_path.glob("solution_tol_*um.json"))) == 2
    code, out = _run(["sweep", SMOOTH, "--tolerances-m", 1e-5, "--out-dir", tmp_path / "x"], capsys)
    assert code == 2
