"""Lower boundary for e > 1/2 and its cusps.

Between the cusps e_k = k/(k+1) the minimal triangle density is attained by
a complete multipartite graphon whose last part carries a bipartite block
of value p.  At each cusp the graphon is complete (k+1)-partite.
"""

import numpy as np

from graphon_lab.boundary import min_triangle, scallop_optimizer, scallop_params, scallop_value
from graphon_lab.graphon import edge_density, triangle_density
from graphon_lab.phase import region_rows

np.set_printoptions(precision=4, suppress=True)

for e in (0.55, 0.6, 2 / 3, 0.7, 0.75):
    sp = scallop_params(e)
    g = scallop_optimizer(e)
    print(f"e = {e:.4f}: ell = {sp.ell}, c = {sp.c:.6f}, p = {sp.p:.6f}, "
          f"t = {triangle_density(g):.6f}, I = {scallop_value(e) + 0.0:.6f}")
    assert abs(edge_density(g) - e) < 1e-12

print("\ncusp check e_k (2 e_k - 1):")
for k in range(1, 6):
    ek = k / (k + 1)
    print(f"  k = {k}: min_triangle = {min_triangle(ek):.12f}, formula = {ek * (2 * ek - 1):.12f}")

# The region table used for plotting elsewhere.
rows = region_rows(0.05)
print(f"\nregion table: {len(rows)} rows, first three:")
for r in rows[:3]:
    print("  ", r)
