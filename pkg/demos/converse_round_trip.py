"""From a controller with a KL envelope to a certified restraint function.

The controller u = -sign(x) steers the interval system to its target; the
converse construction turns it into a running cost ell(d) + 1 whose value
function passes the decrease check.

Run:  python3 demos/converse_round_trip.py
"""

import numpy as np

from mrfkit import BracketPair, ConverseParams, Grid, build_mrf, make_system
from mrfkit.config import BETA_REGISTRY, CONTROLLER_REGISTRY

system = make_system("int1d_mintime")
grid = Grid.from_spacing(system.box, 0.01)
res = build_mrf(system, BETA_REGISTRY["saturating_exp"], BracketPair.identity(),
                CONTROLLER_REGISTRY["neg_sign"], grid, ConverseParams())

print("radii r_i:")
for i, r in res.r_table.rows():
    print(f"  i={int(i):+d}  r={r:.6g}")
print("strip times (observed, T_i):")
for i, obs, T in res.times.rows():
    print(f"  i={int(i):+d}  {obs:.4f}  {T:.4f}")
print("ell at a few radii:")
for R in (0.01, 0.1, 1.0, 2.4):
    print(f"  ell({R}) = {res.ell(R):.6g}   ell1({R}) = {res.ell1(R):.6g}")
print("structure:", "PASS" if res.structure.passed else "FAIL")
print(f"decrease : {'PASS' if res.decrease.passed else 'FAIL'} "
      f"(worst {res.decrease.worst_residual:.2e}, tol {res.tol:.1e})")
print(f"V(1.0) = {res.V([1.0]):.4f}")
