"""Flat part of the lower boundary: no triangles, edge density below 1/2.

The numerical minimizer of the rate at t = 0 should land on the two-block
bipartite graphon with value 2e across the halves.
"""

import numpy as np

from graphon_lab.boundary import bipartite_optimizer
from graphon_lab.canonical import compare_reduced
from graphon_lab.graphon import rate, rate_pointwise
from graphon_lab.solver import SolveConfig, minimize_rate

np.set_printoptions(precision=3, suppress=True)

for e in (0.1, 0.25, 0.4):
    res = minimize_rate(e, 0.0, SolveConfig(m=16, starts=8, seed=0))
    closed = rate_pointwise(2 * e) / 2
    print(f"e = {e}: numeric I = {res.value:.10f}, closed form = {closed:.10f}")
    print(f"   distance to bipartite graphon: {compare_reduced(res.graphon, bipartite_optimizer(e)):.2e}")
    print(f"   winning start #{res.start_index} ({res.starts[res.start_index].kind})")

# The optimizer has only two distinct values, so averaging the 16 x 16
# solution onto two halves loses nothing.
g = bipartite_optimizer(0.25)
print("bipartite graphon at e = 0.25:\n", g.values, "\nrate", rate(g))
