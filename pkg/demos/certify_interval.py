"""Certify W = 2 d on the unit-speed interval and drive a few starts to the target.

Run:  python3 demos/certify_interval.py [output_dir]   (default: demo_out)
"""

import os
import sys

import numpy as np

from mrfkit import (
    Grid,
    GridField,
    SynthesisParams,
    check_decrease,
    check_integrability,
    check_structure,
    compute_brackets,
    make_comparators,
    make_system,
    synthesize_level_halving,
)
from mrfkit.plots import plot_field

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
os.makedirs(out, exist_ok=True)
system = make_system("int1d_mintime")
grid = Grid.from_spacing(system.box, 0.01)
W = GridField.from_function(grid, lambda x: 2.0 * system.distance(x), system.distance)
comp = make_comparators("one", "saturating")

print("structure :", "PASS" if check_structure(W).passed else "FAIL")
dec = check_decrease(W, system, comp)
print(f"decrease  : {'PASS' if dec.passed else 'FAIL'} (worst residual {dec.worst_residual:.4f})")
P = check_integrability(comp.p0, float(W.values.max()))
print(f"P table   : {P.reason}")

brackets = compute_brackets(W, system.distance)
records = []
for z in (-1.9, -0.7, 0.4, 1.6):
    rec = synthesize_level_halving(system, W, comp, P, [z], SynthesisParams(), brackets)
    records.append(rec)
    print(f"z={z:+.1f}  time={rec.trajectory.total_cost:.3f}  bound={rec.cost_bound:.3f}  "
          f"segments={len(rec.segments)}  {'PASS' if rec.passed else 'FAIL'}")

# a weaker candidate fails: W = d cannot pay for the unit running cost
bad = check_decrease(W.with_values(0.5 * W.values), system, comp)
print(f"W = d     : {'PASS' if bad.passed else 'FAIL'} (worst residual {bad.worst_residual:.4f})")
print("wrote", plot_field(W, f"{out}/interval_field.svg", records, system.name))
