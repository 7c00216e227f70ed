import json
import math
import os

import numpy as np
import pytest

from kreinlab import (ConfigError, Experiment, ExperimentConfig, ShiftedSolver, __version__,
                      run_admissibility, run_convergence, run_spectrum_tracking)
from kreinlab.lab import CSV_COLUMNS, VECTOR_IDS, divergence_verdict

SMALL = dict(K_per_side=400, schedule=(10.0, 100.0, 1000.0))


@pytest.fixture(scope="module")
def small_run():
    return run_convergence(ExperimentConfig(**SMALL))


@pytest.fixture(scope="module")
def control_run():
    return run_convergence(ExperimentConfig(alpha=0.0, **SMALL))


# configuration -------------------------------------------------------------

def test_alpha_above_threshold_rejected():
    with pytest.raises(ConfigError, match="α < 1/a") as exc:
        Experiment(ExperimentConfig(alpha=50.0, **SMALL))
    assert exc.value.field == "alpha"


@pytest.mark.parametrize("kw,field", [
    (dict(z=0.0), "z"), (dict(beta=2.5), "beta"), (dict(eta=0.5), "eta"),
    (dict(specs=("robin",)), "specs"), (dict(kappa=-1.0), "kappa"), (dict(K_per_side=1), "K_per_side"),
    (dict(alpha_fraction=1.0), "alpha_fraction"), (dict(spectrum_k=6), "spectrum_k"),
    (dict(L=-2.0), "L"), (dict(schedule=(0.0, 10.0)), "schedule"),
    (dict(beta=2.0, kappa=0.9), "kappa"), (dict(general_q=-1.0), "general_q"),
])
def test_invalid_config_names_field(kw, field):
    cfg = dict(SMALL)
    cfg.update(kw)
    with pytest.raises(ConfigError) as exc:
        Experiment(ExperimentConfig(**cfg))
    assert exc.value.field == field


def test_derived_alpha_and_shift():
    exp = Experiment(ExperimentConfig(**SMALL))
    fb = exp.form_bound
    assert exp.alpha == pytest.approx(0.5 / fb.a)
    assert exp.z == pytest.approx(-1.0 - exp.alpha * fb.b - 2.0)
    assert exp.reference.lower_bound_estimate > exp.z + 1.0


def test_default_schedule_capped_by_resolution():
    exp = Experiment(ExperimentConfig(K_per_side=200, grading_exponent=1.0, alpha=0.0))
    assert exp.schedule[-1] < 1e6
    assert exp.schedule == sorted(exp.schedule)
    full = Experiment(ExperimentConfig(K_per_side=400, alpha=0.0))
    assert full.schedule == [10.0 ** k for k in range(1, 7)]


def test_explicit_underresolved_schedule_warns():
    exp = Experiment(ExperimentConfig(K_per_side=200, grading_exponent=1.0, alpha=0.0,
                                      schedule=(10.0, 1e6)))
    assert exp.warnings and "cut-off radius" in exp.warnings[0]


def test_config_hash():
    a, b = ExperimentConfig(**SMALL), ExperimentConfig(**SMALL)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() == ExperimentConfig(output="elsewhere", **SMALL).config_hash()
    assert a.config_hash() != ExperimentConfig(seed=1, **SMALL).config_hash()


# convergence ---------------------------------------------------------------

def test_report_layout(small_run):
    rows = small_run.rows
    assert len(rows) == 3 * 3 * len(VECTOR_IDS)
    ns = [r["n"] for r in rows]
    assert ns == sorted(ns)
    assert set(r["spec"] for r in rows) == {"friedrichs", "krein", "general"}
    meta = small_run.metadata
    for key in ("config", "config_hash", "library_version", "mesh_warnings"):
        assert key in meta
    assert meta["library_version"] == __version__
    assert meta["eigenvalues_below_shift"]["friedrichs@10"] == 0


def test_control_friedrichs_exact_and_krein_constant(control_run):
    assert np.all(control_run.column("sre_error", "friedrichs") == 0.0)
    assert np.all(control_run.column("norm_resolvent_est", "friedrichs") == 0.0)
    for vid in VECTOR_IDS:
        e = control_run.column("sre_error", "krein", vid)
        assert np.ptp(e) < 1e-10
        assert e.min() >= 1e-3


def test_convergence_trends(small_run):
    for vid in VECTOR_IDS:
        kr = small_run.column("sre_error", "krein", vid)
        fr = small_run.column("sre_error", "friedrichs", vid)
        assert np.all(np.diff(kr) < 0)
        assert np.all(np.diff(fr) <= 1e-12)
        assert np.all(fr <= kr)
    est = small_run.column("norm_resolvent_est", "krein", "bump")
    assert np.all(np.diff(est) < 0)
    adm = small_run.column("admissibility_plus", "krein", "bump")
    assert np.all(np.diff(adm) >= 0)


def test_resolvent_ordering_below_all_spectra():
    exp = Experiment(ExperimentConfig(**SMALL))
    for n in exp.schedule:
        W = exp.cutoff_matrix(n)
        ops = {t: exp.sequence_operator(t, W=W) for t in ("krein", "general", "friedrichs")}
        lam = min(op.lower_bound_estimate for op in ops.values()) - 1.0
        sol = {t: ShiftedSolver(op, lam) for t, op in ops.items()}
        for f in exp.test_vectors.values():
            q = {t: f @ (exp.ambient_mass @ s.apply_ambient(f)) for t, s in sol.items()}
            tol = 1e-12 * abs(q["krein"])
            assert q["krein"] >= q["general"] - tol
            assert q["general"] >= q["friedrichs"] - tol


def test_csv_is_deterministic(tmp_path, small_run, monkeypatch):
    monkeypatch.setenv("KREINLAB_THREADS", "3")
    again = run_convergence(ExperimentConfig(**SMALL))
    assert again.to_csv() == small_run.to_csv()
    csv_path, json_path = small_run.write(tmp_path)
    text = open(csv_path).read()
    header, first = text.splitlines()[:2]
    assert header == ",".join(CSV_COLUMNS)
    assert "e" not in first.split(",")[3]
    digits = first.split(",")[3].lstrip("0.").replace(".", "")
    assert len(digits) == 17
    meta = json.load(open(json_path))
    assert meta["config_hash"] == small_run.metadata["config_hash"]
    assert sorted(os.listdir(tmp_path)) == ["convergence.csv", "convergence.json"]


# admissibility ---------------------------------------------------------------

def test_admissibility_power_fit():
    rep = run_admissibility(ExperimentConfig(alpha=0.0, K_per_side=2000))
    fit = rep.metadata["fits"]["plus"]
    assert fit["law"] == "power"
    assert 0.283 <= fit["exponent"] <= 0.383
    assert rep.metadata["verdict"] == "admissible-divergent"
    vals = rep.column("admissibility_plus")
    assert np.all(np.diff(vals) >= 0)
    np.testing.assert_allclose(vals, rep.column("admissibility_minus"), rtol=1e-12)


def test_admissibility_log_fit():
    rep = run_admissibility(ExperimentConfig(alpha=0.0, beta=1.0, K_per_side=2000))
    fit = rep.metadata["fits"]["minus"]
    assert fit["law"] == "log" and fit["correlation"] >= 0.999
    assert rep.metadata["verdict"] == "admissible-divergent"


def test_capped_potential_not_admissible():
    rep = run_admissibility(ExperimentConfig(alpha=0.0, cap=10.0, K_per_side=400))
    vals = rep.column("admissibility_plus")
    assert np.ptp(vals[1:]) == 0.0
    assert rep.metadata["verdict"] == "not admissible"


def test_divergence_verdict_rules():
    assert divergence_verdict([1.0, 2.0, 3.0, 4.0]) == "admissible-divergent"
    assert divergence_verdict([1.0, 1.5, 1.6, 1.61]) == "not admissible"
    assert divergence_verdict([1.0, 2.0]) == "undetermined"


# spectrum ------------------------------------------------------------------------

def test_spectrum_control():
    rep = run_spectrum_tracking(ExperimentConfig(alpha=0.0, schedule=(10.0, 100.0), K_per_side=400), k=3)
    for n in (10.0, 100.0):
        kr = rep.metadata["spectra"][f"krein@{n:g}"]
        np.testing.assert_allclose(kr[:2], [-1.0, -1.0], atol=1e-6)
        fr = rep.metadata["spectra"][f"friedrichs@{n:g}"]
        assert fr[0] == pytest.approx(math.pi ** 2 / 100, rel=0.005)
    assert rep.metadata["interlacing_ok"]
    with pytest.raises(ConfigError):
        run_spectrum_tracking(ExperimentConfig(alpha=0.0, **SMALL), k=6)


def test_flagship_spectrum_regression():
    rep = run_spectrum_tracking(ExperimentConfig(schedule=(10.0, 1e4)), k=3)
    sp = rep.metadata["spectra"]
    assert rep.metadata["interlacing_ok"]
    # the Krein sequence carries two bound states that dive as n grows
    assert sp["krein@10"][0] == pytest.approx(-26.51402692218769, rel=1e-8)
    assert sp["krein@10000"][0] == pytest.approx(-6275.11140369145, rel=1e-8)
    assert sp["friedrichs@10000"][0] == pytest.approx(-0.49978740735812094, rel=1e-8)
    ref = rep.metadata["reference_spectrum"][0]
    assert abs(sp["friedrichs@10000"][0] - ref) < 0.1 * abs(sp["friedrichs@10"][0] - ref)
