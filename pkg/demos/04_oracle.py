"""
The extension/form correspondence checked on small dense random models.

Each model is R^N with a random mass matrix, a PSD form and a subspace of
codimension d; its deficiency space at eta is computed by a null-space
solve, independently of the finite-element pipeline.
"""
import numpy as np

from kreinlab import ExtensionSpec, generate_instance, run_oracle, verify_correspondence

inst = generate_instance(N=8, d=2, seed=0)
print(f"eta = {inst.eta:.4f}, redraws = {inst.redraws}")
rep = verify_correspondence(inst, ExtensionSpec.general(inst.eta, np.eye(2), np.diag([1.0, 0.0])))
for c in rep.checks:
    print(f"  {c.name:<20} residual {c.residual:.2e}  {'ok' if c.passed else 'FAILED'}")

reports = run_oracle(range(100), N=8, d=2)
bad = [line for r in reports for line in r.failure_lines()]
print(f"{len(reports)} reports, {len(bad)} failures")
