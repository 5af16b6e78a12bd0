"""Minimum time of the double integrator against the bang-bang closed form.

Run:  python3 demos/double_integrator.py [output_dir]   (default: demo_out)
"""

import os
import sys

import numpy as np

from mrfkit import Grid, make_system, solve_min_time
from mrfkit.plots import plot_field
from mrfkit.systems import double_integrator_ball_time, double_integrator_origin_time

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
os.makedirs(out, exist_ok=True)
system = make_system("double_integrator_mintime")
V = solve_min_time(system, Grid.from_spacing(system.box, 0.02))
print(f"sweeps {V.meta['sweeps']}, converged {V.meta['converged']}")
print("   state          grid   ball   origin")
for x, v in [(1.0, 0.0), (-1.0, 0.5), (0.5, -1.0), (0.12, -0.64)]:
    print(f"({x:+.2f}, {v:+.2f})  {V([x, v]):6.3f} {double_integrator_ball_time(x, v, 0.1):6.3f} "
          f"{float(double_integrator_origin_time(x, v)):6.3f}")
# the last state grazes the target ball, where the grid value is least accurate
print("wrote", plot_field(V, f"{out}/double_integrator.svg", (), system.name))
