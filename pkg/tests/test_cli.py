import json
import subprocess
import sys

import pytest

import kreinlab.cli as cli
from kreinlab import EigenSolverError
from kreinlab.cli import build_config, main

CFG = """
[mesh]
L = 10
K_per_side = 300
grading_exponent = 3   # graded towards the puncture

[potential]
kappa = 1
beta = 1.5

[experiment]
alpha_fraction = 0.5
eta = -1
specs = friedrichs, krein
schedule = 10, 100, 1000
power_iterations = 50
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "flagship.cfg"
    p.write_text(CFG)
    return str(p)


def test_convergence_run_and_idempotence(cfg, tmp_path, capsys):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["convergence", "--config", cfg, "--out", str(out1)]) == 0
    assert sorted(p.name for p in out1.iterdir()) == ["convergence.csv", "convergence.json"]
    assert main(["convergence", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "convergence.csv").read_bytes() == (out2 / "convergence.csv").read_bytes()
    # the sidecar is itself a valid config
    out3 = tmp_path / "c"
    assert main(["convergence", "--config", str(out1 / "convergence.json"), "--out", str(out3)]) == 0
    assert (out1 / "convergence.csv").read_bytes() == (out3 / "convergence.csv").read_bytes()
    meta = json.loads((out1 / "convergence.json").read_text())
    assert meta["config"]["K_per_side"] == 300
    assert "convergence.csv" in capsys.readouterr().out


def test_alpha_above_threshold_exit_1(cfg, tmp_path, capsys):
    out = tmp_path / "bad"
    assert main(["convergence", "--config", cfg, "--out", str(out), "alpha=9.9"]) == 1
    err = capsys.readouterr().err
    assert "α < 1/a" in err and "alpha" in err
    assert not out.exists()


@pytest.mark.parametrize("override", ["bogus=1", "K_per_side=abc", "K_per_side=2.5",
                                      "schedule=1,x", "noequals"])
def test_bad_overrides_exit_1(cfg, tmp_path, override, capsys):
    assert main(["convergence", "--config", cfg, "--out", str(tmp_path), override]) == 1
    assert "invalid configuration" in capsys.readouterr().err


def test_unknown_section_and_key(tmp_path):
    p = tmp_path / "x.cfg"
    p.write_text("[solver]\ntol = 1\n")
    assert main(["form-bound", "--config", str(p)]) == 1
    p.write_text("[mesh]\nkappa = 1\n")
    assert main(["form-bound", "--config", str(p)]) == 1
    assert main(["form-bound", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_override_types():
    c = build_config(None, ["K_per_side=64", "schedule=10,1e3", "specs=Krein", "z=none",
                            "alpha=1.5"], "out")
    assert c.K_per_side == 64 and isinstance(c.K_per_side, int)
    assert c.schedule == (10.0, 1000.0)
    assert c.specs == ("krein",)
    assert c.z is None and c.alpha == 1.5 and c.alpha_fraction is None
    assert c.output == "out"


def test_oracle_subcommand(tmp_path):
    assert main(["oracle", "--seeds", "10", "--dim", "8", "--codim", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "oracle_failures.jsonl").read_text() == ""
    summary = json.loads((tmp_path / "oracle.json").read_text())
    assert summary["reports"] == 50 and summary["failures"] == 0
    assert main(["oracle", "--dim", "20", "--out", str(tmp_path)]) == 1
    assert main(["oracle", "--codim", "0", "--out", str(tmp_path)]) == 1


def test_form_bound_admissibility_spectrum(cfg, tmp_path):
    assert main(["form-bound", "--config", cfg, "--out", str(tmp_path)]) == 0
    fb = json.loads((tmp_path / "form_bound.json").read_text())
    assert fb["a"] > 0 and fb["b"] == pytest.approx(fb["a"] * fb["b_grid_value"])
    assert main(["admissibility", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "admissibility.json").read_text())["verdict"] == "admissible-divergent"
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path), "spectrum_k=2"]) == 0
    assert (tmp_path / "spectrum.csv").exists()


def test_numerical_failure_exit_2(cfg, tmp_path, monkeypatch, capsys):
    def boom(exp):
        raise EigenSolverError("did not converge", residual=1e-3)

    monkeypatch.setattr(cli, "run_convergence", boom)
    assert main(["convergence", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err == {"error": "EigenSolverError", "message": "did not converge", "residual": 1e-3}
    assert not (tmp_path / "o").exists()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "kreinlab", "oracle", "--seeds", "2", "--out",
                        str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "kreinlab", "nonsense"], capture_output=True, text=True)
    assert r.returncode != 0
