"""Entropy along a path of fixed edge density, with branch tags.

Each cell is solved numerically and compared with the closed-form graphons
valid there.  Branch changes and spikes in the second difference of s are
reported as candidate transitions.  This takes several minutes on one core.
"""

from graphon_lab.phase import detect_transition, scan_points
from graphon_lab.solver import SolveConfig

e = 0.3
path = [(e, 0.002 + 0.004 * k) for k in range(20)]
table = scan_points(path, SolveConfig(seed=0))
for p in table.points:
    print(f"t = {p.t:.3f}  s = {p.s:.6f}  {p.branch}")

print("\nflags:")
for f in detect_transition(table.points):
    print(f"  {f.kind:18s} t = {f.t:.4f}  {f.detail}")
print(f"\nend of the perturbative family: t = 2e^3 = {2 * e**3:.4f}; constant graphon: t = e^3 = {e**3:.4f}")
