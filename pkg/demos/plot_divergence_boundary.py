"""
Locating the divergence boundary
================================

Without trim, the coupled twist iteration stops converging once dynamic
pressure exceeds the torsional divergence value. Bisection on the
converged/diverged flag recovers it.
"""

from gridvpe import aeroelastic as ae

wing = ae.WingModel(stations_struct=120)
qd = ae.divergence_q(wing)
print(f"closed form q_D = {qd:.1f} Pa")

opts = ae.CouplingOptions(trim=False, alpha_root=0.05, max_iter=2000)

###############################################################################
# A coarse sweep first
for ratio in (0.5, 0.8, 0.95, 1.05, 1.2):
    sol = ae.solve_static(None, wing, opts, q=ratio * qd)
    print(f"q = {ratio:.2f} q_D: {sol.status} after {sol.iterations} iterations")

###############################################################################
# Then bisection
lo, hi = 0.5 * qd, 1.5 * qd
while hi - lo > 0.005 * qd:
    mid = 0.5 * (lo + hi)
    if ae.solve_static(None, wing, opts, q=mid).converged:
        lo = mid
    else:
        hi = mid
print(f"boundary ~ {0.5 * (lo + hi):.1f} Pa ({0.5 * (lo + hi) / qd:.3f} q_D)")
