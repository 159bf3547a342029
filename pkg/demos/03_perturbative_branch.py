"""Just above the flat boundary: the two-block perturbative family.

Inside each half the value is eps, across the halves 2e - eps.  This family
satisfies the stationarity equation with explicit multipliers, and the
numerical solver should reproduce its entropy when it is optimal.
"""

import numpy as np

from graphon_lab.boundary import (
    eps_from_t,
    lambda2_analytic,
    perturbative_entropy,
    perturbative_multipliers,
    perturbative_optimizer,
)
from graphon_lab.solver import (
    SolveConfig,
    el_residual,
    minimize_rate,
    second_variation_min_ratio,
)

for e in (0.25, 0.3):
    for eps in (0.02, 0.05, 0.1):
        t = e**3 - (e - eps) ** 3
        g = perturbative_optimizer(e, eps)
        l1, l2 = perturbative_multipliers(e, eps)
        res = minimize_rate(e, t, SolveConfig(seed=0))
        ratio = second_variation_min_ratio(g.refine(np.linspace(0, 1, 9)), lambda2_analytic(e, eps))
        print(f"(e, eps) = ({e}, {eps}): t = {t:.6f}")
        print(f"   closed-form s = {perturbative_entropy(e, eps):.8f}, numeric s = {-res.value:.8f}")
        print(f"   stationarity residual {el_residual(g, l1, l2):.1e}, "
              f"smallest second-variation ratio {ratio:.3f}")

# Above t = e^3 the same family is no longer the best graphon the solver finds.
e, t = 0.3, 0.04
res = minimize_rate(e, t, SolveConfig(seed=0))
print(f"\n(e, t) = ({e}, {t}): perturbative s = {perturbative_entropy(e, eps_from_t(e, t)):.6f}, "
      f"numeric s = {-res.value:.6f}")
