"""Closed-form optimizers near the lower boundary of the (e, t) region.

Contents
--------
* the bipartite optimizer on the flat part of the boundary (t = 0, e <= 1/2);
* the scallop optimizers for e > 1/2 (complete multipartite plus a
  bipartite corner) and the boundary curves of the feasible region;
* the two-parameter perturbative family near the flat boundary, its entropy,
  multipliers and second-variation coefficients;
* the transition curves where the perturbative entropy stops being analytic;
* the unequal-parts family g_c used to probe optimality in the part size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, NoSolutionError, ResourceError, SingularParameterError
from .graphon import (
    StepGraphon,
    edge_density,
    rate_derivative,
    rate_pointwise,
    rate_second_derivative,
    triangle_density,
)

__all__ = [
    "ScallopParams",
    "PerturbativeParams",
    "bipartite_optimizer",
    "scallop_params",
    "scallop_optimizer",
    "scallop_value",
    "min_triangle",
    "max_triangle",
    "feasible",
    "perturbative_optimizer",
    "perturbative_params",
    "perturbative_entropy",
    "perturbative_multipliers",
    "perturbative_coefficients",
    "eps_from_t",
    "transition_curve_scallop",
    "transition_curve_upper",
    "lambda2_analytic",
    "asymmetric_family",
    "asymmetric_family_params",
    "second_derivative_in_c",
    "boundary_curves",
    "analytic_candidates",
]

_CUSP_TOL = 1e-12
SCALLOP_MAX_PARTS = 4096


# -- flat scallop ---------------------------------------------------------------


def bipartite_optimizer(e: float) -> StepGraphon:
    """Minimizer of I on {t = 0} for e <= 1/2: value 2e between two halves."""
    if not 0.0 <= e <= 0.5:
        raise DomainError(f"bipartite optimizer needs 0 <= e <= 1/2, got {e}")
    p = 2.0 * e
    return StepGraphon([0.0, 0.5, 1.0], [[0.0, p], [p, 0.0]])


# -- curved scallops ------------------------------------------------------------


@dataclass(frozen=True)
class ScallopParams:
    """Parameters of the minimal-triangle graphon for edge density ``e > 1/2``.

    ``ell`` parts; the first ``ell - 1`` have width ``c``, the last one
    carries a bipartite graphon of value ``p`` between its two halves.
    """

    ell: int
    c: float
    p: float
    e: float

    def __post_init__(self):
        tol = 1e-12
        if self.ell < 1:
            raise DomainError("ell must be >= 1")
        lo, hi = 1 - 1 / self.ell, 1 - 1 / (self.ell + 1)
        if not lo - tol <= self.e <= hi + tol:
            raise DomainError(f"e={self.e} outside [{lo}, {hi}] for ell={self.ell}")
        if not 0 < self.c <= 1 / self.ell + tol:
            raise DomainError("c must lie in (0, 1/ell]")
        if not -tol <= self.p <= 1 + tol:
            raise DomainError("p must lie in [0, 1]")
        if self.ell * (self.ell - self.e * (self.ell + 1)) < -1e-9:
            raise DomainError("ell(ell - e(ell+1)) must be non-negative")

    @property
    def last_width(self) -> float:
        return 1.0 - (self.ell - 1) * self.c


def _scallop_for_ell(e: float, ell: int) -> ScallopParams:
    disc = max(ell * (ell - e * (ell + 1)), 0.0)
    c = (ell + math.sqrt(disc)) / (ell * (ell + 1))
    p = 4 * c * (1 - ell * c) / (1 - (ell - 1) * c) ** 2
    return ScallopParams(ell, c, min(max(p, 0.0), 1.0), e)


def _cusp_index(e: float):
    """k if e is (numerically) the cusp k/(k+1), else None."""
    k = round(e / (1 - e)) if e < 1 else None
    if k is not None and k >= 1 and abs(e - k / (k + 1)) <= _CUSP_TOL:
        return k
    return None


def scallop_params(e: float) -> ScallopParams:
    """ell, c and p of the minimal-triangle graphon at edge density e.

    ``ell`` is the integer with ``e`` in ``[1 - 1/ell, 1 - 1/(ell+1))``; at a
    cusp ``e = k/(k+1)`` both neighbouring values describe the same
    graphon and the smaller one (``ell = k``) is used.
    """
    if not 0.5 < e < 1.0:
        raise DomainError(f"scallop parameters need 1/2 < e < 1, got {e}")
    k = _cusp_index(e)
    if k is not None:
        return _scallop_for_ell(e, k)
    ell = int(math.floor(1.0 / (1.0 - e)))
    return _scallop_for_ell(e, ell)


def _scallop_graphon(sp: ScallopParams) -> StepGraphon:
    ell, c, p = sp.ell, sp.c, sp.p
    mid = (1 + (ell - 1) * c) / 2
    b = [k * c for k in range(ell)] + [mid, 1.0]
    m = ell + 1
    V = np.ones((m, m))
    # blocks 0..ell-2 are the small parts, ell-1 and ell the halves of the last
    for k in range(ell - 1):
        V[k, k] = 0.0
    V[ell - 1 :, ell - 1 :] = [[0.0, p], [p, 0.0]]
    return StepGraphon(b, V)


def scallop_optimizer(e: float) -> StepGraphon:
    """Minimal-triangle minimizer of I for 1/2 < e < 1.

    Raises
    ------
    ResourceError
        If ``e`` is so close to 1 that the graphon needs more than
        ``SCALLOP_MAX_PARTS`` parts.
    """
    sp = scallop_params(e)
    if sp.ell > SCALLOP_MAX_PARTS:
        raise ResourceError(f"scallop graphon at e={e} has {sp.ell} parts")
    return _scallop_graphon(sp)


def _scallop_triangle(sp: ScallopParams) -> float:
    # ordered triples of pairwise adjacent blocks: three small parts, two
    # small parts and either half, or one small part and both halves
    k, c, L = sp.ell - 1, sp.c, sp.last_width
    return k * (k - 1) * (k - 2) * c**3 + 3 * k * (k - 1) * c**2 * L + 1.5 * k * c * L**2 * sp.p


def scallop_value(e: float) -> float:
    """Closed-form minimum (1 - (ell-1)c)^2 / 2 * I0(p) on the scallop."""
    sp = scallop_params(e)
    return sp.last_width**2 / 2 * rate_pointwise(sp.p)


def min_triangle(e: float) -> float:
    """Lower boundary of the feasible region (0 up to e = 1/2, then scallops)."""
    if not 0.0 <= e <= 1.0:
        raise DomainError(f"edge density must lie in [0, 1], got {e}")
    if e <= 0.5:
        return 0.0
    if e == 1.0:
        return 1.0
    return _scallop_triangle(scallop_params(e))


def max_triangle(e: float) -> float:
    """Upper boundary t = e^{3/2}."""
    if not 0.0 <= e <= 1.0:
        raise DomainError(f"edge density must lie in [0, 1], got {e}")
    return e**1.5


def feasible(e: float, t: float, tol: float = 1e-12) -> bool:
    """Whether (e, t) lies in the closed feasible region (inclusive ``tol``)."""
    if not (0.0 <= e <= 1.0) or not math.isfinite(t):
        return False
    return min_triangle(e) - tol <= t <= max_triangle(e) + tol


def boundary_curves(step: float = 1e-3):
    """Rows ``(e, t, tag)`` for the three boundary curves and both transition curves."""
    rows = []
    n = int(round(1.0 / step))
    es = np.linspace(0.0, 1.0, n + 1)
    for e in es:
        e = float(e)
        rows.append((e, max_triangle(e), "upper"))
    for e in es:
        e = float(e)
        if e <= 0.5:
            rows.append((e, 0.0, "flat"))
        else:
            rows.append((e, min_triangle(e), "scallop"))
    for e in es:
        e = float(e)
        if 0.5 <= e:
            rows.append((e, transition_curve_scallop(e), "transition_scallop"))
    for e in es:
        e = float(e)
        if 0.0 < e < 0.5:
            rows.append((e, transition_curve_upper(e), "transition_upper"))
    return rows


# -- perturbative family ----------------------------------------------------------


def _check_perturbative(e: float, eps: float) -> None:
    if not 0.0 < e < 1.0:
        raise DomainError(f"perturbative family needs 0 < e < 1, got e={e}")
    if not 0.0 <= eps <= 2 * e:
        raise DomainError(f"need 0 <= eps <= 2e, got eps={eps}, e={e}")
    if 2 * e - eps > 1.0 + 1e-15 or eps > 1.0:
        raise DomainError(f"block values must stay in [0, 1] (e={e}, eps={eps})")


def perturbative_optimizer(e: float, eps: float) -> StepGraphon:
    """Two half-blocks, ``2e - eps`` between them and ``eps`` inside."""
    _check_perturbative(e, eps)
    a = min(2 * e - eps, 1.0)
    return StepGraphon([0.0, 0.5, 1.0], [[eps, a], [a, eps]])


def perturbative_entropy(e: float, eps: float) -> float:
    """Entropy -(I0(eps) + I0(2e - eps)) / 2 of the perturbative graphon."""
    _check_perturbative(e, eps)
    return -0.5 * (rate_pointwise(eps) + rate_pointwise(min(2 * e - eps, 1.0)))


@dataclass(frozen=True)
class PerturbativeParams:
    e: float
    eps: float
    t: float
    s: float

    def __post_init__(self):
        _check_perturbative(self.e, self.eps)
        if abs(self.t - (self.e**3 - (self.e - self.eps) ** 3)) > 1e-12:
            raise DomainError("t inconsistent with (e, eps)")
        s = -0.5 * (rate_pointwise(self.eps) + rate_pointwise(2 * self.e - self.eps))
        if abs(self.s - s) > 1e-12:
            raise DomainError("s inconsistent with (e, eps)")


def perturbative_params(e: float, eps: float) -> PerturbativeParams:
    return PerturbativeParams(e, eps, e**3 - (e - eps) ** 3, perturbative_entropy(e, eps))


def eps_from_t(e: float, t: float) -> float:
    """The eps in [0, 2e] with e^3 - (e - eps)^3 = t.

    The map is a monotone cubic, so it is inverted in closed form with a
    real cube root.
    """
    if not e > 0.0:
        raise DomainError(f"need e > 0, got {e}")
    if not -1e-15 <= t <= 2 * e**3 + 1e-15:
        raise DomainError(f"t={t} outside [0, 2e^3] for e={e}")
    eps = e - float(np.cbrt(e**3 - t))
    return min(max(eps, 0.0), 2 * e)


def lambda2_analytic(e: float, eps: float) -> float:
    """Triangle multiplier making the perturbative graphon stationary.

    lambda2 = (I0'(2e - eps) - I0'(eps)) / (6 (e - eps)^2).
    """
    if not 0.0 < eps < 2 * e or 2 * e - eps >= 1.0:
        raise DomainError(f"need 0 < eps < 2e and 2e - eps < 1 (e={e}, eps={eps})")
    if abs(e - eps) < 1e-14:
        raise SingularParameterError("lambda2 is singular at eps = e (constant graphon)")
    return (rate_derivative(2 * e - eps) - rate_derivative(eps)) / (6 * (e - eps) ** 2)


def perturbative_multipliers(e: float, eps: float):
    """(lambda1, lambda2) satisfying the Euler-Lagrange equation on both cell types."""
    lam2 = lambda2_analytic(e, eps)
    h_diag = 0.5 * (eps**2 + (2 * e - eps) ** 2)
    lam1 = -rate_derivative(eps) - 3 * lam2 * h_diag
    return lam1, lam2


def perturbative_coefficients(e: float, eps: float):
    """Coefficients (c1, c2, c3) of the per-slice quadratic form.

    The second variation is non-negative on each slice once c1 c2 > c3^2.
    """
    d = (rate_derivative(2 * e - eps) - rate_derivative(eps)) / (2 * (e - eps) ** 2)
    c1 = rate_second_derivative(eps) / 2 + eps * d
    c2 = rate_second_derivative(2 * e - eps) / 2 + eps * d
    c3 = (2 * e - eps) * d
    return c1, c2, c3


# -- transition curves ----------------------------------------------------------------


def transition_curve_scallop(e: float) -> float:
    """t = ((2e-1)^3 + 3(2e-1)) / 4, where the perturbative formula hits e = (1+eps)/2."""
    if not 0.5 <= e <= 1.0:
        raise DomainError(f"need 1/2 <= e <= 1, got {e}")
    x = 2 * e - 1
    return (x**3 + 3 * x) / 4


def transition_curve_upper(e: float) -> float:
    """t = 2 e^3, the end of the perturbative branch at eps = 2e."""
    if not 0.0 < e < 0.5:
        raise DomainError(f"need 0 < e < 1/2, got {e}")
    return 2 * e**3


# -- unequal parts family ---------------------------------------------------------------


class AsymmetricParams(NamedTuple):
    c: float
    p: float
    alpha: float
    beta: float
    lambda1: float
    lambda2: float


def _family_graphon(c, p, alpha, beta) -> StepGraphon:
    return StepGraphon([0.0, c, 1.0], [[alpha, p], [p, beta]])


def _family_residual(x, c, e, t):
    p, al, be = x
    a, b = c, 1 - c
    E = a * a * al + b * b * be + 2 * a * b * p
    T = a**3 * al**3 + b**3 * be**3 + 3 * a * a * b * al * p * p + 3 * a * b * b * be * p * p
    hAA = a * al * al + b * p * p
    hBB = a * p * p + b * be * be
    hAB = a * al * p + b * p * be
    # EL holds for some (lambda1, lambda2) iff (I0'(.)) lies in span{1, h}
    M = np.array(
        [
            [rate_derivative(al), 1.0, hAA],
            [rate_derivative(be), 1.0, hBB],
            [rate_derivative(p), 1.0, hAB],
        ]
    )
    return np.array([E - e, T - t, np.linalg.det(M)])


def _family_multipliers(x, c):
    p, al, be = x
    a, b = c, 1 - c
    h = np.array([a * al * al + b * p * p, a * p * p + b * be * be, a * al * p + b * p * be])
    d = np.array([rate_derivative(al), rate_derivative(be), rate_derivative(p)])
    A = np.column_stack([np.ones(3), 3 * h])
    lam, *_ = np.linalg.lstsq(A, -d, rcond=None)
    return float(lam[0]), float(lam[1])


def _newton_family(c, e, t, x0, tol=1e-11, max_iter=200):
    x = np.array(x0, dtype=float)
    for _ in range(max_iter):
        f = _family_residual(x, c, e, t)
        if np.max(np.abs(f)) < tol:
            return x
        J = np.empty((3, 3))
        for k in range(3):
            dx = np.zeros(3)
            dx[k] = 1e-7 * max(1.0, abs(x[k]))
            J[:, k] = (_family_residual(x + dx, c, e, t) - _family_residual(x - dx, c, e, t)) / (
                2 * dx[k]
            )
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError as exc:
            raise NoSolutionError("singular Jacobian in g_c solve", x) from exc
        lam = 1.0
        # damping: stay strictly inside (0, 1) and do not increase the residual much
        while lam > 1e-10:
            xn = x + lam * step
            if np.all(xn > 0) and np.all(xn < 1):
                if np.max(np.abs(_family_residual(xn, c, e, t))) <= (1 - 1e-4 * lam) * np.max(
                    np.abs(f)
                ) or lam < 1e-3:
                    break
            lam *= 0.5
        else:
            raise NoSolutionError("damped Newton step collapsed in g_c solve", x)
        x = xn
    if np.max(np.abs(_family_residual(x, c, e, t))) < tol:
        return x
    raise NoSolutionError(f"g_c solve did not converge for c={c}", x)


def asymmetric_family_params(c: float, e: float, t: float) -> AsymmetricParams:
    """Solve for (p, alpha, beta) of g_c and the best-fit multipliers.

    The solve starts from the perturbative graphon at c = 1/2 and follows
    the family by continuation in c.
    """
    if not 0.0 < c < 1.0:
        raise DomainError(f"c must lie in (0, 1), got {c}")
    if not 0.0 < e < 0.5:
        raise DomainError(f"need 0 < e < 1/2, got {e}")
    if t == 0.0:
        p = e / (2 * c * (1 - c))
        if p > 1.0:
            raise NoSolutionError("no zero-triangle member of the family", np.array([p, 0, 0]))
        return AsymmetricParams(c, p, 0.0, 0.0, -rate_derivative(p), 0.0)
    eps = eps_from_t(e, t)
    if not 0.0 < eps < e:
        raise DomainError("g_c family is defined for 0 < t < e^3")
    x = np.array([2 * e - eps, eps, eps])
    n_steps = max(1, int(math.ceil(abs(c - 0.5) / 0.01)))
    for cc in np.linspace(0.5, c, n_steps + 1)[1:] if c != 0.5 else [0.5]:
        x = _newton_family(float(cc), e, t, x)
    lam1, lam2 = _family_multipliers(x, c)
    return AsymmetricParams(c, float(x[0]), float(x[1]), float(x[2]), lam1, lam2)


def asymmetric_family(c: float, e: float, t: float) -> StepGraphon:
    """The graphon g_c: parts [0, c] and [c, 1], values alpha, beta inside and p across."""
    ap = asymmetric_family_params(c, e, t)
    return _family_graphon(c, ap.p, ap.alpha, ap.beta)


class Estimate(NamedTuple):
    value: float
    error: float


def _family_rate(c, e, t, x0):
    x = _newton_family(c, e, t, x0)
    p, al, be = x
    a, b = c, 1 - c
    return a * a * rate_pointwise(al) + b * b * rate_pointwise(be) + 2 * a * b * rate_pointwise(p)


def second_derivative_in_c(e: float, t: float, h: float = 1e-3, guard: bool = True) -> Estimate:
    """d^2 I(g_c) / dc^2 at c = 1/2 by Richardson-refined central differences.

    Returns the refined value and ``|refined - D(h/2)|`` as the error estimate.
    """
    if guard and t > 2 * e**3 / 4:
        raise DomainError("second_derivative_in_c is meant for small t (t <= e^3 / 2)")
    base = asymmetric_family_params(0.5, e, t)
    x0 = np.array([base.p, base.alpha, base.beta])
    i0 = _family_rate(0.5, e, t, x0)

    def D(step):
        ip = _family_rate(0.5 + step, e, t, x0)
        im = _family_rate(0.5 - step, e, t, x0)
        return (ip - 2 * i0 + im) / step**2

    d1, d2 = D(h), D(h / 2)
    r = (4 * d2 - d1) / 3
    return Estimate(float(r), float(abs(r - d2)))


# -- candidates at a point ----------------------------------------------------------


def analytic_candidates(e: float, t: float, tol: float = 1e-12):
    """Closed-form graphons valid at (e, t), as ``(tag, graphon)`` pairs.

    Order: ``constant`` (on t = e^3), ``scallop-<ell>`` (on the lower
    boundary for e > 1/2), then ``bipartite-perturbative`` (the two-block
    family, which includes the flat-boundary optimizer at eps = 0).
    """
    out = []
    if not 0.0 < e < 1.0:
        return out
    if abs(t - e**3) <= tol:
        out.append(("constant", StepGraphon.constant(e)))
    if e > 0.5 and abs(t - min_triangle(e)) <= tol:
        out.append((f"scallop-{scallop_params(e).ell}", scallop_optimizer(e)))
    if -tol <= t <= 2 * e**3 + tol:
        eps = eps_from_t(e, min(max(t, 0.0), 2 * e**3))
        if 2 * e - eps <= 1.0 and eps <= 1.0:
            out.append(("bipartite-perturbative", perturbative_optimizer(e, eps)))
    return out
