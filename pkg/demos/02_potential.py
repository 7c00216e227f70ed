"""
The singular potential V = |x|^-beta / (4 kappa), its relative form bound
against the kinetic energy, and the divergence of (V_n h, h) for the
cut-offs V_n = min(n, V) tested on a deficiency vector h.
"""
import numpy as np

from kreinlab import (RegularizingSequence, SingularPotential, admissibility_curve, build_mesh,
                      deficiency_basis, estimate_form_bound)

mesh = build_mesh(10.0, 2000, 3.0)

# Hardy regime: beta = 2 is form-bounded with a < 1 only when kappa > 1.
for kappa in (2.0, 0.9):
    fb = estimate_form_bound(mesh, SingularPotential(kappa, 2.0))
    print(f"beta=2, kappa={kappa}: a = {fb.a:.4f}, b = {fb.b:.4f}, alpha_max = {fb.alpha_max:.4f}")

fb = estimate_form_bound(mesh, SingularPotential(1.0, 1.5))
print("beta=1.5 trade-off table (t, a):", [(t, round(a, 4)) for t, a in fb.table])

h = deficiency_basis(mesh, -1.0).vectors[:, 1]
levels = 10.0 ** np.arange(1, 7)
for beta in (1.0, 1.5):
    cur = admissibility_curve(mesh, RegularizingSequence(SingularPotential(1.0, beta)), h, levels)
    print(f"beta={beta}: (V_n h, h) =", np.round(cur.values, 4))
    if beta == 1.0:
        print("   slope per ln n:", np.polyfit(np.log(levels), cur.values, 1)[0], "(expect 0.25)")
    else:
        fit = np.polyfit(np.log(levels[1:]), np.log(cur.values[1:]), 1)[0]
        print("   log-log slope over n >= 100:", fit, "(tends to 1/3)")

capped = RegularizingSequence(SingularPotential(1.0, 1.5), cap=10.0)
print("capped at 10:", np.round(admissibility_curve(mesh, capped, h, levels).values, 4))
