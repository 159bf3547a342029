"""Constrained minimization of the rate function over equal-width step graphons.

The problem is

    minimize I(g)  subject to  e(g) = e,  t(g) = t,  0 <= g <= 1

over symmetric m x m value matrices.  It is solved with an augmented
Lagrangian outer loop and a spectral projected-gradient inner loop (box
projection onto [0, 1], Barzilai-Borwein steps, nonmonotone line search).
Each start first runs a short feasibility phase, which lets it leave the
constant graphon: at fixed e the constant graphon is a local minimizer of t,
so a plain penalty method started there never reaches t < e^3.

Gradients are taken in the cell-weighted metric, i.e. with respect to the
function values rather than the raw matrix entries:

    dI/dg = I0'(g),   de/dg = 1,   dt/dg = 3 h,   h = aux_h(g).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import xlogy

from .boundary import analytic_candidates, feasible, max_triangle, min_triangle
from .errors import ConvergenceError, DomainError, ShapeMismatchError
from .graphon import (
    StepGraphon,
    _aux_h_values,
    average_onto,
    rate,
    rate_derivative,
    rate_second_derivative,
)

__all__ = [
    "SolveConfig",
    "SolveResult",
    "StartSummary",
    "minimize_rate",
    "el_residual",
    "fit_multipliers",
    "second_variation",
    "tangent_projection",
    "second_variation_min_ratio",
    "interior_mask",
    "functional_gradients",
    "INTERIOR_TOL",
]

# cells with INTERIOR_TOL < g < 1 - INTERIOR_TOL count as interior
INTERIOR_TOL = 1e-6

# a start whose feasibility phase ends farther than this from (e, t) is dropped
FEASIBILITY_GIVE_UP = 1e-6


@dataclass(frozen=True)
class SolveConfig:
    """Settings for :func:`minimize_rate`.

    ``threads`` only controls how many starts run concurrently; results do
    not depend on it.
    """

    m: int = 16
    starts: int = 8
    seed: int = 0
    mu0: float = 10.0
    growth: float = 5.0
    mu_max: float = 1e8
    tol_c: float = 1e-8
    tol_g: float = 1e-7
    max_outer: int = 60
    max_inner: int = 5000
    threads: int = 1

    def __post_init__(self):
        if self.m < 2:
            raise DomainError("m must be at least 2")
        if self.starts < 1:
            raise DomainError("need at least one start")
        if not (self.tol_c > 0 and self.tol_g > 0):
            raise DomainError("tolerances must be positive")
        if not self.growth > 1:
            raise DomainError("penalty growth factor must exceed 1")
        if not 0 < self.mu0 <= self.mu_max:
            raise DomainError("need 0 < mu0 <= mu_max")
        if self.max_outer < 1 or self.max_inner < 1:
            raise DomainError("iteration limits must be positive")
        if self.threads < 1:
            raise DomainError("threads must be positive")


class StartSummary(NamedTuple):
    index: int
    kind: str
    value: float
    converged: bool
    constraint_residual: float
    pg_norm: float
    outer_iterations: int


@dataclass
class SolveResult:
    """Outcome of :func:`minimize_rate`.

    ``converged`` implies both constraint residuals are at most ``tol_c``
    and ``pg_norm`` (sup-norm projected gradient of the Lagrangian) is at
    most ``tol_g``.  ``active_set`` marks cells pinned at 0 or 1.
    ``history`` holds, per outer iteration of the winning start,
    ``(merit_before, merit_after, value, constraint_residual, mu)``.
    """

    graphon: StepGraphon
    value: float
    lambda1: float
    lambda2: float
    el_residual_sup: float
    constraint_residuals: tuple
    converged: bool
    start_index: int
    pg_norm: float = math.nan
    active_set: np.ndarray = field(default=None, repr=False)
    on_boundary: bool = False
    starts: tuple = ()
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "graphon": self.graphon.to_dict(),
            "value": self.value,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "el_residual_sup": self.el_residual_sup,
            "constraint_residuals": list(self.constraint_residuals),
            "converged": self.converged,
            "start_index": self.start_index,
            "pg_norm": self.pg_norm,
            "active_set": [[int(i), int(j)] for i, j in zip(*np.nonzero(self.active_set))]
            if self.active_set is not None
            else [],
            "on_boundary": self.on_boundary,
            "starts": [s._asdict() for s in self.starts],
        }


# -- Euler-Lagrange and second-order diagnostics ----------------------------------


def interior_mask(values, tol: float = INTERIOR_TOL) -> np.ndarray:
    v = np.asarray(values)
    return (v > tol) & (v < 1 - tol)


def functional_gradients(g: StepGraphon):
    """Functional derivatives (dI/dg, de/dg, dt/dg) as block matrices.

    For a symmetric block perturbation ``D`` the directional derivative of
    a functional ``F`` is ``sum(g.cell_weights * dF * D)``.
    """
    h = _aux_h_values(g.values, g.widths)
    return rate_derivative(g.values), np.ones_like(g.values), 3.0 * h


def el_residual(g: StepGraphon, lambda1: float, lambda2: float) -> float:
    """sup over interior cells of |I0'(g) + lambda1 + 3 lambda2 h|.

    Cells at (or within ``INTERIOR_TOL`` of) 0 or 1 are excluded; returns
    0 when there are no interior cells.
    """
    mask = interior_mask(g.values)
    if not mask.any():
        return 0.0
    h = _aux_h_values(g.values, g.widths)
    r = rate_derivative(g.values) + lambda1 + 3 * lambda2 * h
    return float(np.max(np.abs(r[mask])))


def fit_multipliers(g: StepGraphon, lambda2_fallback: float | None = None):
    """Least-squares (lambda1, lambda2) from the interior cells of ``g``.

    Each cell is weighted by its area.  When the interior values of ``h``
    are all equal the fit cannot see lambda2; then ``lambda2_fallback``
    (default 0) is used and only lambda1 is fitted.
    """
    mask = interior_mask(g.values)
    if not mask.any():
        return math.nan, math.nan
    h = _aux_h_values(g.values, g.widths)[mask]
    d = rate_derivative(g.values)[mask]
    sw = np.sqrt(g.cell_weights[mask])
    if np.ptp(h) > 1e-9:
        A = np.column_stack([np.ones_like(h), 3 * h]) * sw[:, None]
        lam, *_ = np.linalg.lstsq(A, -d * sw, rcond=None)
        return float(lam[0]), float(lam[1])
    lam2 = 0.0 if lambda2_fallback is None else float(lambda2_fallback)
    lam1 = float(np.average(-d - 3 * lam2 * h, weights=sw**2))
    return lam1, lam2


def _as_delta(g: StepGraphon, delta_g) -> np.ndarray:
    d = delta_g.values if isinstance(delta_g, StepGraphon) else np.asarray(delta_g, dtype=float)
    if d.shape != g.values.shape:
        raise ShapeMismatchError(f"delta_g has shape {d.shape}, graphon has {g.values.shape}")
    if not np.allclose(d, d.T, rtol=0, atol=1e-14):
        raise ShapeMismatchError("delta_g must be symmetric")
    return d


def second_variation(g: StepGraphon, delta_g, lambda2: float) -> float:
    """3 lambda2 iiint g dg dg + (1/2) iint I0''(g) dg^2, block-exact.

    ``delta_g`` is a symmetric array (or step graphon values) on the block
    structure of ``g``; it may take negative values.
    """
    d = _as_delta(g, delta_g)
    w = g.widths
    W = g.cell_weights
    dd = (d * w) @ d
    cubic = float(np.sum(W * g.values * dd))
    quad = float(np.sum(W * rate_second_derivative(g.values) * d * d))
    return 3 * lambda2 * cubic + 0.5 * quad


def _tangent_basis(g: StepGraphon):
    """Orthonormal (cell-weighted) basis of symmetric perturbations with de = dt = 0."""
    m = g.m
    W = g.cell_weights
    h = _aux_h_values(g.values, g.widths)
    iu = np.triu_indices(m)
    # coordinates: upper-triangle entries; metric weight counts both halves
    mult = np.where(iu[0] == iu[1], 1.0, 2.0) * W[iu]
    C = np.vstack([mult, 3 * h[iu] * mult])
    # null space of C in the weighted inner product <x, y> = sum mult x y
    S = np.sqrt(mult)
    _, _, vt = np.linalg.svd(C / S, full_matrices=True)
    rank = np.linalg.matrix_rank(C / S)
    Z = vt[rank:].T / S[:, None]
    return iu, Z


def tangent_projection(g: StepGraphon, delta_g) -> np.ndarray:
    """Project ``delta_g`` onto the first-order kernel of (e, t) at ``g``."""
    d = _as_delta(g, delta_g)
    W = g.cell_weights
    h = _aux_h_values(g.values, g.widths)
    B = np.stack([np.ones_like(h), 3 * h])
    G = np.einsum("aij,bij,ij->ab", B, B, W)
    rhs = np.einsum("aij,ij,ij->a", B, d, W)
    coef = np.linalg.lstsq(G, rhs, rcond=None)[0]
    return d - np.einsum("a,aij->ij", coef, B)


def second_variation_min_ratio(g: StepGraphon, lambda2: float) -> float:
    """min over tangent perturbations of second_variation / iint dg^2.

    The quadratic form is bounded below by (1/2) iint dg^2 on the tangent
    space exactly when this ratio is at least 1/2.
    """
    iu, Z = _tangent_basis(g)
    m = g.m
    k = Z.shape[1]
    if k == 0:
        return math.inf
    Q = np.empty((k, k))
    N = np.empty((k, k))
    mats = []
    for a in range(k):
        D = np.zeros((m, m))
        D[iu] = Z[:, a]
        D = D + np.triu(D, 1).T
        mats.append(D)
    W = g.cell_weights
    for a in range(k):
        for b in range(a, k):
            s = 0.5 * (second_variation(g, mats[a] + mats[b], lambda2)
                       - second_variation(g, mats[a], lambda2)
                       - second_variation(g, mats[b], lambda2))
            Q[a, b] = Q[b, a] = s
            N[a, b] = N[b, a] = float(np.sum(W * mats[a] * mats[b]))
    L = np.linalg.cholesky(N)
    Li = np.linalg.inv(L)
    return float(np.linalg.eigvalsh(Li @ Q @ Li.T)[0])


# -- the solver -----------------------------------------------------------------


class _Problem:
    """Block sums on an equal-width m-grid, scaled to functional units."""

    def __init__(self, e, t, m):
        self.e, self.t, self.m = e, t, m
        self.w = 1.0 / m
        self.W = self.w * self.w

    def constraints(self, G):
        h = (G @ G) * self.w
        h = 0.5 * (h + h.T)
        return G.sum() * self.W - self.e, np.sum(G * h) * self.W - self.t, h

    def value(self, G):
        return float(np.sum(xlogy(G, G) + xlogy(1 - G, 1 - G))) * 0.5 * self.W


def _spg(G, fg, tol, max_iter, amax=1.0, memory=10):
    """Spectral projected gradient on the box [0, 1] with a GLL line search.

    Returns the iterate, the sup-norm projected gradient and the number of
    iterations.  The final merit never exceeds the starting one.
    """
    f, g = fg(G)
    hist = [f]
    alpha = amax
    pg = np.inf
    n = 0
    for n in range(max_iter):
        pg = float(np.max(np.abs(np.clip(G - g, 0.0, 1.0) - G)))
        if pg < tol:
            break
        D = np.clip(G - alpha * g, 0.0, 1.0) - G
        slope = float(np.sum(g * D))
        if slope >= 0:
            break
        fref = max(hist[-memory:])
        lam = 1.0
        while True:
            Gn = G + lam * D
            fn, gn = fg(Gn)
            if fn <= fref + 1e-4 * lam * slope:
                break
            lam *= 0.5
            if lam < 1e-14:
                return G, pg, n
        s = Gn - G
        y = gn - g
        sy = float(np.sum(s * y))
        alpha = min(amax, max(1e-10, float(np.sum(s * s)) / sy)) if sy > 0 else amax
        G, f, g = Gn, fn, gn
        hist.append(f)
    else:
        pg = float(np.max(np.abs(np.clip(G - g, 0.0, 1.0) - G)))
    return G, pg, n


def _feasibility(P: _Problem, G, iters=3000):
    """Move ``G`` onto {e(g) = e, t(g) = t} within the box.

    A gradient phase on the squared violation is followed by Gauss-Newton
    corrections (minimum-norm steps on the free cells, then clipping).
    """

    def fg(X):
        c1, c2, h = P.constraints(X)
        return 0.5 * (c1 * c1 + c2 * c2) / P.W, c1 + 3 * c2 * h

    G, _, _ = _spg(G, fg, 1e-15, iters, amax=1.0)
    for _ in range(100):
        c1, c2, h = P.constraints(G)
        cn = max(abs(c1), abs(c2))
        if cn < 1e-13:
            break
        free = interior_mask(G, 1e-12)
        if free.sum() < 2:
            break
        B = np.stack([np.ones(free.sum()), 3 * h[free]])
        A = B @ B.T * P.W
        try:
            coef = np.linalg.solve(A + 1e-14 * np.eye(2), np.array([c1, c2]))
        except np.linalg.LinAlgError:
            break
        step = np.zeros_like(G)
        step[free] = -(coef @ B)
        lam = 1.0
        while lam > 1e-6:
            Gn = np.clip(G + lam * step, 0.0, 1.0)
            d1, d2, _ = P.constraints(Gn)
            if max(abs(d1), abs(d2)) < cn:
                break
            lam *= 0.5
        else:
            break
        G = Gn
    return G


def _initial_multipliers(P: _Problem, G):
    """Interior least squares, with an active-set rule when lambda2 is unidentifiable."""
    _, _, h = P.constraints(G)
    d = rate_derivative(G)
    mask = interior_mask(G)
    if not mask.any():
        return 0.0, 0.0
    hi, di = h[mask], d[mask]
    if np.ptp(hi) > 1e-9:
        A = np.column_stack([np.ones_like(hi), 3 * hi])
        lam = np.linalg.lstsq(A, -di, rcond=None)[0]
        return float(lam[0]), float(lam[1])
    # smallest lambda2 >= 0 keeping the gradient at zero cells non-negative
    h0, d0 = float(hi.mean()), float(di.mean())
    zero = G <= INTERIOR_TOL
    lam2 = 0.0
    if zero.any():
        dh = h[zero] - h0
        need = (d0 - d[zero]) / 3.0
        ok = dh > 1e-12
        if ok.any():
            lam2 = max(0.0, float(np.max(need[ok] / dh[ok])))
    return -d0 - 3 * lam2 * h0, lam2


class _StartOutcome(NamedTuple):
    G: np.ndarray
    value: float
    l1: float
    l2: float
    cres: tuple
    pg: float
    converged: bool
    outer: int
    history: list


def _run_start(P: _Problem, G0, cfg: SolveConfig) -> _StartOutcome:
    G = _feasibility(P, np.array(G0, dtype=float))
    c1, c2, _ = P.constraints(G)
    if max(abs(c1), abs(c2)) > FEASIBILITY_GIVE_UP:
        # stuck at a local minimizer of the constraint violation
        return _StartOutcome(
            G, P.value(G), 0.0, 0.0, (abs(c1), abs(c2)), math.inf, False, 0, []
        )
    l1, l2 = _initial_multipliers(P, G)
    mu = cfg.mu0
    prev_c = math.inf
    stall = 0
    history = []
    pg = math.inf
    converged = False
    out = 0
    W = P.W
    inner_tol = max(cfg.tol_g, 1e-3)
    c1, c2, _ = P.constraints(G)
    accepted_c = max(abs(c1), abs(c2))
    best_c = best_pg = math.inf
    for out in range(cfg.max_outer):

        def fg(X, l1=l1, l2=l2, mu=mu):
            c1, c2, h = P.constraints(X)
            merit = P.value(X) + l1 * c1 + l2 * c2 + 0.5 * mu * (c1 * c1 + c2 * c2)
            return merit / W, rate_derivative(X) + (l1 + mu * c1) + 3 * (l2 + mu * c2) * h

        f0 = fg(G)[0]
        Gn, pg, _ = _spg(G, fg, inner_tol, cfg.max_inner)
        f1 = fg(Gn)[0]
        c1, c2, _ = P.constraints(Gn)
        cn = max(abs(c1), abs(c2))
        history.append((f0 * W, f1 * W, P.value(Gn), cn, mu))
        if cn > max(100 * accepted_c, 1e-6) and mu < cfg.mu_max:
            # the penalty is too weak to hold the constraints: retry from G
            mu = min(mu * cfg.growth, cfg.mu_max)
            continue
        G = Gn
        accepted_c = cn
        if cn <= cfg.tol_c and pg <= cfg.tol_g:
            converged = True
            break
        l1 += mu * c1
        l2 += mu * c2
        if pg <= inner_tol:
            inner_tol = max(cfg.tol_g, 0.1 * inner_tol)
        # give up when neither feasibility nor stationarity is improving
        if cn > 0.5 * best_c and pg > 0.5 * best_pg:
            stall += 1
            if stall >= 4 or mu >= cfg.mu_max:
                break
        else:
            stall = 0
        best_c, best_pg = min(best_c, cn), min(best_pg, pg)
        if cn > 0.25 * prev_c:
            mu = min(mu * cfg.growth, cfg.mu_max)
        prev_c = cn
    c1, c2, _ = P.constraints(G)
    return _StartOutcome(
        G, P.value(G), l1, l2, (abs(c1), abs(c2)), pg, converged, out + 1, history
    )


def _symmetric_uniform(rng, m):
    A = rng.random((m, m))
    return np.triu(A) + np.triu(A, 1).T


def _random_start(P: _Problem, rng, m, index):
    if index % 2 == 0:
        A = _symmetric_uniform(rng, m)
    else:
        # a few random blocks: gives starts close to multipartite structures
        k = int(rng.integers(2, 5))
        labels = np.sort(rng.integers(0, k, size=m))
        B = _symmetric_uniform(rng, k)
        A = B[np.ix_(labels, labels)]
    mean = A.mean()
    if mean > 0:
        A = A * (P.e / mean)
    return np.clip(A, 0.0, 1.0)


def _starts(e, t, cfg: SolveConfig):
    m = cfg.m
    P = _Problem(e, t, m)
    grid = np.linspace(0.0, 1.0, m + 1)
    out = []
    rng = np.random.default_rng([cfg.seed, 0])
    jitter = 1e-3 * (_symmetric_uniform(rng, m) - 0.5)
    out.append(("constant", np.clip(np.full((m, m), e) + jitter, 0.0, 1.0)))
    for tag, cand in analytic_candidates(e, t, tol=1e-9):
        out.append((tag, average_onto(cand, grid).values.copy()))
    idx = len(out)
    while len(out) < cfg.starts:
        rng = np.random.default_rng([cfg.seed, idx])
        out.append(("random", _random_start(P, rng, m, idx)))
        idx += 1
    return out[: cfg.starts]


def minimize_rate(e: float, t: float, config: SolveConfig | None = None) -> SolveResult:
    """Minimize I over m x m equal-width step graphons with e(g) = e, t(g) = t.

    Starts are, in index order: the constant graphon (slightly jittered),
    the closed-form candidates valid at (e, t), then seeded random
    matrices.  The best converged start wins; values within 1e-10 go to the
    smaller index.

    Raises
    ------
    DomainError
        If (e, t) is outside the feasible region.
    ConvergenceError
        If no start converged; ``diagnostics`` lists every start.
    """
    cfg = config or SolveConfig()
    e, t = float(e), float(t)
    if not feasible(e, t):
        raise DomainError(f"(e, t) = ({e}, {t}) is not feasible")
    on_boundary = t <= min_triangle(e) + 1e-12 or t >= max_triangle(e) - 1e-12
    P = _Problem(e, t, cfg.m)
    starts = _starts(e, t, cfg)

    def work(item):
        return _run_start(P, item[1], cfg)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            outcomes = list(ex.map(work, starts))
    else:
        outcomes = [work(s) for s in starts]

    summaries = tuple(
        StartSummary(i, starts[i][0], o.value, o.converged, max(o.cres), o.pg, o.outer)
        for i, o in enumerate(outcomes)
    )
    best = None
    for i, o in enumerate(outcomes):
        if o.converged and (best is None or o.value < outcomes[best].value - 1e-10):
            best = i
    if best is None:
        raise ConvergenceError(
            f"no start converged at (e, t) = ({e}, {t})", diagnostics=list(summaries)
        )
    o = outcomes[best]
    g = StepGraphon.from_matrix(o.G)
    lam1, lam2 = fit_multipliers(g, lambda2_fallback=o.l2)
    return SolveResult(
        graphon=g,
        value=rate(g),
        lambda1=lam1,
        lambda2=lam2,
        el_residual_sup=el_residual(g, lam1, lam2),
        constraint_residuals=o.cres,
        converged=True,
        start_index=best,
        pg_norm=o.pg,
        active_set=~interior_mask(g.values),
        on_boundary=on_boundary,
        starts=summaries,
        history=o.history,
    )
