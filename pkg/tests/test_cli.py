import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from nbcollide.cli import EXIT_FAILED_CHECK, EXIT_OK, EXIT_USAGE, main


def run_cli(*argv):
    return main([str(a) for a in argv])


def load(path):
    return json.loads(path.read_text())


@pytest.fixture(scope="module")
def kepler_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("kepler")
    assert run_cli("simulate", "--preset", "kepler_pair", "--out", d) == EXIT_OK
    return d


class TestSimulate:
    def test_kepler_summary(self, kepler_dir):
        s = load(kepler_dir / "summary.json")
        assert s["status"] == "collision"
        # unit masses at rest, separation 2: free-fall time pi / sqrt 2
        assert s["T_est"] == pytest.approx(np.pi / np.sqrt(2), rel=1e-6)
        assert s["terminal_r_G_ratio"] < 1e-10
        np.testing.assert_allclose(s["L_G"], 0.0, atol=1e-12)
        assert (kepler_dir / "trajectory.csv").exists()

    def test_lagrange_stays_central(self, tmp_path):
        assert run_cli("simulate", "--preset", "lagrange_homothetic", "--out", tmp_path) == EXIT_OK
        s = load(tmp_path / "summary.json")
        assert s["terminal_cc_distance"]["distance"] < 1e-10
        assert s["terminal_cc_distance"]["lambda"] == pytest.approx(3.0, abs=1e-12)

    def test_deterministic(self, kepler_dir, tmp_path):
        assert run_cli("simulate", "--preset", "kepler_pair", "--out", tmp_path) == EXIT_OK
        for f in ("summary.json", "trajectory.csv"):
            assert (tmp_path / f).read_bytes() == (kepler_dir / f).read_bytes()

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"schema": 1, "name": "pair", "masses": [1, 1],
                                   "positions": [[-1, 0], [1, 0]], "velocities": [[0, 0], [0, 0]],
                                   "output": {"summary": "s.json", "trajectory": "t.csv"}}))
        assert run_cli("--config", cfg, "--precision", "double", "simulate", "--out", tmp_path) == EXIT_OK
        s = load(tmp_path / "s.json")
        assert s["scenario"] == "pair" and s["precision"] == "double"
        assert (tmp_path / "t.csv").exists()

    def test_batch(self, tmp_path):
        assert run_cli("simulate", "--preset", "kepler_pair", "--preset", "euler_homothetic", "--jobs", 2,
                       "--out", tmp_path) == EXIT_OK
        assert load(tmp_path / "00_kepler_pair" / "summary.json")["status"] == "collision"
        assert load(tmp_path / "01_euler_homothetic" / "summary.json")["status"] == "collision"

    def test_unknown_field(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"schema": 1, "preset": "kepler_pair", "integrator": {"tolerance": 1}}))
        assert run_cli("simulate", "--config", cfg, "--out", tmp_path) == EXIT_USAGE
        err = json.loads(capsys.readouterr().err)
        assert err["status"] == "failure"
        assert err["field"] == "integrator.tolerance"

    def test_malformed_json(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"schema": 1,\n "preset": }\n')
        assert run_cli("simulate", "--config", cfg) == EXIT_USAGE
        err = json.loads(capsys.readouterr().err)
        assert "line 2" in err["reason"]

    def test_no_scenario(self, capsys):
        assert run_cli("simulate") == EXIT_USAGE


class TestRatesAndSpin:
    def test_rates_from_csv(self, kepler_dir, tmp_path, capsys):
        code = run_cli("rates", "--traj", kepler_dir / "trajectory.csv", "--A-reference", 9 ** (2 / 3) / 2,
                       "--window", 1e-8, 1e-5, "--out", tmp_path)
        assert code == EXIT_OK
        rep = load(tmp_path / "rates.json")["rates"]
        assert rep["A_hat"] == pytest.approx(9 ** (2 / 3) / 2, rel=1e-3)
        assert "J/(T-t)^(4/3)" in capsys.readouterr().out

    def test_insufficient_window(self, kepler_dir, tmp_path, capsys):
        code = run_cli("rates", "--traj", kepler_dir / "trajectory.csv", "--window", 1e-5, 2e-5, "--out", tmp_path)
        assert code == EXIT_FAILED_CHECK
        assert load(tmp_path / "rates.json")["status"] == "failure"
        assert "insufficient window" in json.loads(capsys.readouterr().err)["reason"]

    def test_kepler_spin_is_zero(self, kepler_dir, tmp_path):
        assert run_cli("spin", "--traj", kepler_dir / "trajectory.csv", "--out", tmp_path) == EXIT_OK
        rep = load(tmp_path / "spin.json")
        assert rep["total"] == 0.0
        assert all(row[2] == 0.0 for row in rep["rows"])

    def test_missing_trajectory(self, tmp_path):
        assert run_cli("spin", "--traj", tmp_path / "nope.csv") == EXIT_USAGE


class TestCC:
    def test_three_equal_masses(self, tmp_path, capsys):
        assert run_cli("cc", "--masses", "1,1,1", "--multistart", 64, "--out", tmp_path) == EXIT_OK
        cat = load(tmp_path / "cc.json")["catalog"]
        lams = sorted(c["lambda"] for c in cat)
        assert lams[0] == pytest.approx(3.0, abs=1e-10)
        assert lams[-1] == pytest.approx(5 / np.sqrt(2), abs=1e-10)
        assert "lambda" in capsys.readouterr().out

    def test_square(self, tmp_path):
        assert run_cli("cc", "--masses", "1,1,1,1", "--relabel", "--out", tmp_path) == EXIT_OK
        lams = [c["lambda"] for c in load(tmp_path / "cc.json")["catalog"]]
        assert min(lams) == pytest.approx(2 + 4 * np.sqrt(2), rel=1e-12)

    def test_repeat_is_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert run_cli("cc", "--masses", "1,2,3", "--multistart", 32, "--seed", 3, "--out", d) == EXIT_OK
        assert (a / "cc.json").read_bytes() == (b / "cc.json").read_bytes()

    @pytest.mark.parametrize("masses", ["1,1", "1,x,1", "1,-1,1"])
    def test_bad_masses(self, masses, capsys):
        assert run_cli("cc", "--masses", masses) == EXIT_USAGE
        assert json.loads(capsys.readouterr().err)["status"] == "failure"


class TestSegment:
    def test_self_test(self, tmp_path):
        assert run_cli("segment", "--self-test", "--out", tmp_path) == EXIT_OK
        d = load(tmp_path / "segment.json")
        assert d["status"] == "ok"
        assert d["closed_form_deviation"] < 1e-12
        assert d["cone"]["mu_arrow"] == pytest.approx(-1.0)
        assert d["cone"]["xi_arrow"] == pytest.approx(1.0)


@pytest.mark.skipif(shutil.which("nbcollide") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["nbcollide", "segment", "--self-test", "--out", str(tmp_path)], capture_output=True,
                         text=True)
    assert res.returncode == 0
    assert "verified=True" in res.stdout


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "nbcollide", "cc", "--masses", "1,1,1,2"], capture_output=True,
                         text=True, cwd=tmp_path)
    assert res.returncode == 0
    assert (tmp_path / "cc.json").exists()
