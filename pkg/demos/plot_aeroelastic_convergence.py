"""
Static aeroelastic coupling
===========================

Solve the three static flight cases on the demo wing, then check that the
same cruise run through the simulated grid gives bit-identical fields.
"""

import math

from gridvpe import aeroelastic as ae
from gridvpe.cli import run_demo

wing, cases = ae.load_demo_config()

###############################################################################
# Trimmed solutions
for label, case in cases.items():
    fc = ae.flight_condition(case, wing)
    sol = ae.solve_static(case, wing)
    print(f"{label:9s} q={fc.q:8.1f} Pa  cl={fc.cl_target:+.3f}  {sol.status} in {sol.iterations:2d} it  "
          f"tip twist {math.degrees(sol.state.twist[-1]):+.3f} deg  tip deflection {sol.state.deflection[-1]:+.3f} m")

###############################################################################
# The residual history of cruise
print(ae.convergence_csv(ae.solve_static(cases["cruise"], wing).history))

###############################################################################
# In-process versus on-grid
local = run_demo("cruise", "in-process")
grid = run_demo("cruise", "on-grid")
print("identical twist:", local.twist.tobytes() == grid.twist.tobytes())
print("grid makespan (s):", grid.trace.metrics()["makespan_s"])
