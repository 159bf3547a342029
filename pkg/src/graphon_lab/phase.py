"""Entropy surface over the feasible region, branch tags and transition flags.

Each cell (e, t) gets

    s = max(-minimize_rate value, -rate of every closed-form candidate)

and a branch tag naming where the maximum came from.  Paths through the
scan are checked for branch changes and for spikes in the second difference
of s, the two numerical signatures of a loss of analyticity.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import __version__
from .boundary import (
    analytic_candidates,
    feasible,
    max_triangle,
    min_triangle,
    transition_curve_scallop,
    transition_curve_upper,
)
from .canonical import canonicalize, compare_reduced
from .errors import ConvergenceError, DomainError, GraphonLabError
from .graphon import rate
from .solver import SolveConfig, minimize_rate

__all__ = [
    "BRANCHES",
    "GridSpec",
    "PhasePoint",
    "SkippedCell",
    "ScanTable",
    "Flag",
    "scan",
    "scan_points",
    "detect_transition",
    "legendre",
    "emit_region",
    "region_rows",
    "BRANCH_DISTANCE",
    "BRANCH_VALUE_TOL",
    "KAPPA",
]

BRANCHES = ("bipartite-perturbative", "scallop-<ell>", "constant", "numeric-other")
S_MAX = 0.5 * math.log(2.0)

# a numeric optimizer is tagged with an analytic branch when it is this close
BRANCH_DISTANCE = 0.02
BRANCH_VALUE_TOL = 1e-4
KAPPA = 20.0
# second differences below this are solver noise and never flagged
D2_FLOOR = 1e-8
LEGENDRE_CONVENTION = "psi(beta1, beta2) = max over cells of s + beta1 * e + beta2 * t"


@dataclass(frozen=True)
class GridSpec:
    """Inclusive, evenly spaced e and t axes (``steps`` points each)."""

    e_min: float
    e_max: float
    e_steps: int
    t_min: float
    t_max: float
    t_steps: int

    def __post_init__(self):
        if self.e_steps < 1 or self.t_steps < 1:
            raise DomainError("grid needs at least one point per axis")
        if self.e_max < self.e_min or self.t_max < self.t_min:
            raise DomainError("grid ranges must be increasing")

    def axes(self):
        return (
            np.linspace(self.e_min, self.e_max, self.e_steps),
            np.linspace(self.t_min, self.t_max, self.t_steps),
        )

    def points(self):
        es, ts = self.axes()
        return [(float(e), float(t)) for e in es for t in ts]


@dataclass
class PhasePoint:
    e: float
    t: float
    s: float
    branch: str
    opt_summary: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not feasible(self.e, self.t):
            raise DomainError(f"({self.e}, {self.t}) is not feasible")
        if not math.isnan(self.s) and not -1e-9 <= self.s <= S_MAX + 1e-9:
            raise DomainError(f"entropy {self.s} outside [0, ln2/2]")


class SkippedCell(NamedTuple):
    e: float
    t: float
    reason: str


@dataclass
class ScanTable:
    grid: dict
    points: list
    skipped: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.grid.get("count")
        if n is not None and n != len(self.points) + len(self.skipped):
            raise DomainError("grid spec inconsistent with point count")

    def arrays(self):
        e = np.array([p.e for p in self.points])
        t = np.array([p.t for p in self.points])
        s = np.array([p.s for p in self.points])
        return e, t, s

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["e", "t", "s", "branch", "el_residual", "converged"])
        for p in self.points:
            w.writerow(
                [repr(p.e), repr(p.t), repr(p.s), p.branch,
                 repr(p.diagnostics.get("el_residual", math.nan)),
                 int(bool(p.diagnostics.get("converged", False)))]
            )
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def sidecar(self) -> dict:
        return {
            "grid": self.grid,
            "provenance": self.provenance,
            "skipped": [c._asdict() for c in self.skipped],
            "points": [
                {"e": p.e, "t": p.t, "opt_summary": p.opt_summary, "diagnostics": p.diagnostics}
                for p in self.points
            ],
        }

    def write(self, csv_path, json_path=None):
        self.to_csv(csv_path)
        json_path = json_path or os.path.splitext(str(csv_path))[0] + ".json"
        with open(json_path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=1, sort_keys=True)
        return json_path

    @classmethod
    def read(cls, csv_path, json_path=None) -> "ScanTable":
        json_path = json_path or os.path.splitext(str(csv_path))[0] + ".json"
        with open(json_path) as fh:
            side = json.load(fh)
        with open(csv_path) as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
        extra = {(p["e"], p["t"]): p for p in side["points"]}
        pts = []
        for r in rows:
            e, t = float(r["e"]), float(r["t"])
            x = extra.get((e, t), {})
            pts.append(PhasePoint(e, t, float(r["s"]), r["branch"],
                                  x.get("opt_summary", {}), x.get("diagnostics", {})))
        skipped = [SkippedCell(**c) for c in side.get("skipped", [])]
        return cls(side["grid"], pts, skipped, side.get("provenance", {}))


# -- per-cell evaluation ----------------------------------------------------------------


def _evaluate_cell(args) -> PhasePoint:
    e, t, cfg = args
    cands = analytic_candidates(e, t, tol=1e-9)
    cand_s = [(tag, -rate(g), g) for tag, g in cands]
    diagnostics = {"converged": False, "el_residual": math.nan}
    summary: dict = {"candidates": {tag: s for tag, s, _ in cand_s}}
    s_num = math.nan
    g_num = None
    try:
        res = minimize_rate(e, t, cfg)
        s_num = -res.value
        g_num = res.graphon
        diagnostics.update(
            converged=res.converged,
            el_residual=res.el_residual_sup,
            start_index=res.start_index,
            lambda1=res.lambda1,
            lambda2=res.lambda2,
            on_boundary=res.on_boundary,
        )
        cg = canonicalize(g_num)
        summary["numeric_s"] = s_num
        summary["canonical_values"] = np.round(cg.values, 6).tolist()
    except ConvergenceError as exc:
        diagnostics["error"] = str(exc)

    best_tag, best_s, best_g = None, -math.inf, None
    for tag, s, g in cand_s:
        if s > best_s + 1e-12:
            best_tag, best_s, best_g = tag, s, g

    if g_num is not None and best_g is not None:
        dist = compare_reduced(g_num, best_g)
        summary["nearest_candidate"] = best_tag
        summary["distance_to_candidate"] = dist
    else:
        dist = math.inf

    if g_num is None:
        s, branch = (best_s, best_tag) if best_tag else (math.nan, "numeric-other")
    elif best_tag is None:
        s, branch = s_num, "numeric-other"
    elif best_s > s_num + BRANCH_VALUE_TOL:
        s, branch = best_s, best_tag
    elif abs(best_s - s_num) <= BRANCH_VALUE_TOL and dist <= BRANCH_DISTANCE:
        s, branch = max(s_num, best_s), best_tag
    else:
        s, branch = max(s_num, best_s), "numeric-other"
    return PhasePoint(e, t, s, branch, summary, diagnostics)


def _run_cells(cells, cfg: SolveConfig, threads: int):
    jobs = [(e, t, cfg) for e, t in cells]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(_evaluate_cell, jobs))
    return [_evaluate_cell(j) for j in jobs]


def scan_points(points, config: SolveConfig | None = None, threads: int = 1,
                grid: dict | None = None) -> ScanTable:
    """Evaluate arbitrary (e, t) cells in order; infeasible ones are skipped."""
    cfg = config or SolveConfig()
    pts = [(float(e), float(t)) for e, t in points]
    keep, skipped = [], []
    for e, t in pts:
        if feasible(e, t):
            keep.append((e, t))
        else:
            skipped.append(SkippedCell(e, t, "infeasible"))
    results = _run_cells(keep, cfg, threads)
    g = dict(grid or {"kind": "points"})
    g["count"] = len(pts)
    prov = {"version": __version__, "solve_config": asdict(cfg), "seed": cfg.seed}
    return ScanTable(g, results, skipped, prov)


def scan(grid: GridSpec, config: SolveConfig | None = None, threads: int = 1) -> ScanTable:
    """Entropy and branch tag on every feasible cell of ``grid``."""
    g = {"kind": "grid", **asdict(grid)}
    return scan_points(grid.points(), config, threads, g)


# -- transitions ----------------------------------------------------------------------


class Flag(NamedTuple):
    """A flagged location on a path.

    ``kind`` is ``"branch"`` (tag change between consecutive cells, located
    at their midpoint) or ``"second-difference"`` (located at the cell).
    """

    kind: str
    index: float
    e: float
    t: float
    detail: str


def detect_transition(path, table: ScanTable | None = None, kappa: float = KAPPA):
    """Flag branch changes and second-difference spikes along a path.

    Parameters
    ----------
    path : sequence of PhasePoint, or of (e, t) looked up in ``table``
        Ordered cells; at least 5 with a finite entropy are required.
    kappa : float
        A cell is flagged when |s[k+1] - 2 s[k] + s[k-1]| exceeds ``kappa``
        times the median of these over the path (and a 1e-8 noise floor).
    """
    if table is not None:
        lookup = {(p.e, p.t): p for p in table.points}
        pts = [lookup[(float(e), float(t))] for e, t in path if (float(e), float(t)) in lookup]
    else:
        pts = list(path)
    pts = [p for p in pts if not math.isnan(p.s)]
    if len(pts) < 5:
        raise DomainError("a path needs at least 5 solved cells")
    flags = []
    for k in range(len(pts) - 1):
        a, b = pts[k], pts[k + 1]
        if a.branch != b.branch:
            flags.append(Flag("branch", k + 0.5, 0.5 * (a.e + b.e), 0.5 * (a.t + b.t),
                              f"{a.branch} -> {b.branch}"))
    s = np.array([p.s for p in pts])
    d2 = np.abs(s[2:] - 2 * s[1:-1] + s[:-2])
    med = float(np.median(d2))
    thresh = max(kappa * med, D2_FLOOR)
    for k, v in enumerate(d2, start=1):
        if v > thresh:
            flags.append(Flag("second-difference", float(k), pts[k].e, pts[k].t,
                              f"{v:.3g} > {thresh:.3g}"))
    return flags


# -- Legendre transform ---------------------------------------------------------------


def legendre(table: ScanTable, beta1: float, beta2: float):
    """Grid Legendre transform: (psi, (e, t)) with psi = max s + beta1 e + beta2 t."""
    e, t, s = table.arrays()
    ok = np.isfinite(s)
    if not ok.any():
        raise DomainError("scan has no solved cells")
    val = np.where(ok, s + beta1 * e + beta2 * t, -np.inf)
    k = int(np.argmax(val))
    return float(val[k]), (float(e[k]), float(t[k]))


# -- region -----------------------------------------------------------------------


def region_rows(step: float = 1e-3):
    """Rows (e, t_lower, t_upper, transition_scallop, transition_upper).

    The grid is ``0, step, ..., 1`` plus every cusp ``k/(k+1)`` inside it, so
    cusp values appear exactly.  Undefined transition values are NaN.
    """
    if not 0 < step <= 1:
        raise DomainError("step must lie in (0, 1]")
    n = int(round(1.0 / step))
    es = set(np.round(np.linspace(0.0, 1.0, n + 1), 12).tolist())
    k = 1
    while k / (k + 1) < 1 - step:
        es.add(k / (k + 1))
        k += 1
    rows = []
    for e in sorted(es):
        ts = transition_curve_scallop(e) if e >= 0.5 else math.nan
        tu = transition_curve_upper(e) if 0 < e < 0.5 else math.nan
        rows.append((e, min_triangle(e), max_triangle(e), ts, tu))
    return rows


def emit_region(step: float = 1e-3, path=None) -> str:
    """CSV of the region boundary and both transition curves."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["e", "t_lower", "t_upper", "transition_scallop", "transition_upper"])
    for row in region_rows(step):
        w.writerow(["" if (isinstance(x, float) and math.isnan(x)) else repr(x) for x in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
