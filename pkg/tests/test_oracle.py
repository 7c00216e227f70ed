import json

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

import kreinlab.oracle as oracle
from kreinlab import (AssembledOperator, ExtensionSpec, QuadraticForm, assemble_extension,
                      generate_instance, run_oracle, verify_correspondence)
from kreinlab.oracle import CheckResult, CorrespondenceReport, random_general_spec
from kreinlab.spectral import ambient_resolvent


def test_instance_dimensions():
    inst = generate_instance(4, 1, 7)
    assert inst.domain_basis.shape == (4, 3)
    assert inst.deficiency_vectors.shape == (4, 1)
    assert inst.friedrichs_form().dim == 3
    assert inst.deficiency().count == 1
    # deficiency space is (S - eta M)-orthogonal to the domain
    G, H = inst.domain_basis, inst.deficiency_vectors
    r = G.T @ (inst.base_form - inst.eta * inst.mass) @ H
    assert np.abs(r).max() < 1e-12


def test_instance_is_deterministic():
    a, b = generate_instance(8, 2, 42), generate_instance(8, 2, 42)
    for name in ("mass", "base_form", "domain_basis", "deficiency_vectors"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.eta == b.eta and a.redraws == b.redraws
    assert not np.array_equal(a.mass, generate_instance(8, 2, 43).mass)


def test_instance_bounds():
    with pytest.raises(ValueError):
        generate_instance(13, 2, 0)
    with pytest.raises(ValueError):
        generate_instance(4, 4, 0)


@pytest.mark.parametrize("seed", range(5))
def test_identity_base_krein_differs_from_friedrichs(seed):
    inst = generate_instance(2, 1, seed, base="identity")
    fr, defi = inst.friedrichs_form(), inst.deficiency()
    rf = ambient_resolvent(assemble_extension(fr, defi, ExtensionSpec.friedrichs()), inst.eta - 1)
    rk = ambient_resolvent(assemble_extension(fr, defi, ExtensionSpec.krein(inst.eta)), inst.eta - 1)
    assert np.abs(rk - rf).max() > 1e-6


def test_deficiency_at_other_eta():
    inst = generate_instance(6, 2, 1)
    d = inst.deficiency(2 * inst.eta)
    G = inst.domain_basis
    assert d.count == 2
    r = G.T @ (inst.base_form - 2 * inst.eta * inst.mass) @ d.vectors
    assert np.abs(r).max() < 1e-12


def test_friedrichs_and_krein_pass():
    inst = generate_instance(8, 2, 5)
    for spec in (ExtensionSpec.friedrichs(), ExtensionSpec.krein(inst.eta)):
        rep = verify_correspondence(inst, spec)
        assert rep.passed, rep.failure_lines()
        assert [c.name for c in rep.checks] == ["extension", "lower_bound", "ordering",
                                                "krein_eigenvalue", "reparameterization"]


def test_general_specs_pass_on_several_seeds():
    reports = run_oracle(range(20), N=8, d=2)
    assert len(reports) == 100
    assert all(r.passed for r in reports)
    assert max(c.residual for r in reports for c in r.checks) < 1e-10


def test_other_dimensions():
    for N, d in ((4, 1), (6, 3), (12, 4)):
        assert all(r.passed for r in run_oracle(range(3), N=N, d=d))


def test_negated_q_is_rejected():
    inst = generate_instance(8, 2, 0)
    spec = random_general_spec(inst, np.random.default_rng(0))
    X = np.random.default_rng(1).standard_normal((spec.q_matrix.shape[0],) * 2)
    with pytest.raises(ValueError, match="semidefinite"):
        ExtensionSpec.general(inst.eta, spec.subspace, -(spec.q_matrix + X @ X.T))


def test_eta_mismatch_rejected():
    inst = generate_instance(8, 2, 0)
    with pytest.raises(ValueError):
        verify_correspondence(inst, ExtensionSpec.krein(inst.eta - 1))


def test_failure_lines_are_json():
    rep = CorrespondenceReport(3, "krein", [CheckResult("ordering", 0.5, False),
                                            CheckResult("extension", 0.0, True)])
    assert not rep.passed
    (line,) = rep.failure_lines()
    assert json.loads(line) == {"seed": 3, "spec": "krein", "check": "ordering", "residual": 0.5}


def test_oracle_catches_broken_cross_block(monkeypatch):
    real = oracle.assemble_extension

    def broken(fr, defi, spec):
        op = real(fr, defi, spec)
        if op.dim == fr.dim:
            return op
        F = op.form.form_matrix.toarray()
        n = fr.dim
        F[:n, n:] *= 1.01
        F[n:, :n] *= 1.01
        f = op.form
        form = QuadraticForm(F, f.mass_matrix, f.basis_labels, f.eta_tag, f.embedding, f.ambient_mass)
        return AssembledOperator(form, op.lower_bound_estimate, op.spec)

    monkeypatch.setattr(oracle, "assemble_extension", broken)
    inst = generate_instance(8, 2, 0)
    rep = verify_correspondence(inst, ExtensionSpec.krein(inst.eta))
    assert not rep.passed
    assert "extension" in {c.name for c in rep.failures}
