import csv
import io
import math

import numpy as np
import pytest

from graphon_lab import DomainError
from graphon_lab.boundary import max_triangle, min_triangle
from graphon_lab.phase import (
    S_MAX,
    GridSpec,
    PhasePoint,
    ScanTable,
    detect_transition,
    emit_region,
    legendre,
    region_rows,
    scan,
    scan_points,
)
from graphon_lab.solver import SolveConfig

FAST = SolveConfig(m=6, starts=2, seed=0)


def _path(svals, branches=None, e=0.3):
    ts = np.linspace(0.001, 0.02, len(svals))
    branches = branches or ["numeric-other"] * len(svals)
    return [PhasePoint(e, float(t), float(s), b) for t, s, b in zip(ts, svals, branches)]


@pytest.fixture(scope="module")
def small_scan():
    return scan(GridSpec(0.2, 0.3, 2, 0.0, 0.02, 3), FAST)


class TestTypes:
    def test_grid(self):
        g = GridSpec(0.1, 0.3, 3, 0.0, 0.01, 2)
        assert len(g.points()) == 6
        with pytest.raises(DomainError):
            GridSpec(0.3, 0.1, 3, 0, 1, 2)
        with pytest.raises(DomainError):
            GridSpec(0.1, 0.3, 0, 0, 1, 2)

    def test_point_invariants(self):
        with pytest.raises(DomainError):
            PhasePoint(0.3, 0.5, 0.1, "constant")
        with pytest.raises(DomainError):
            PhasePoint(0.3, 0.01, S_MAX + 0.1, "constant")
        assert math.isnan(PhasePoint(0.3, 0.01, math.nan, "numeric-other").s)

    def test_table_count_check(self):
        with pytest.raises(DomainError):
            ScanTable({"count": 3}, [], [])


class TestScan:
    def test_cells(self, small_scan):
        assert small_scan.grid["count"] == 6
        assert len(small_scan.points) + len(small_scan.skipped) == 6
        for p in small_scan.points:
            assert min_triangle(p.e) <= p.t <= max_triangle(p.e)
            assert 0 <= p.s <= S_MAX

    def test_flat_cells_tagged(self, small_scan):
        flat = [p for p in small_scan.points if p.t == 0.0]
        assert flat
        for p in flat:
            assert p.branch == "bipartite-perturbative"

    def test_infeasible_cells_skipped(self):
        tab = scan_points([(0.3, 0.5), (0.3, 0.027)], FAST)
        assert [c.reason for c in tab.skipped] == ["infeasible"]
        assert tab.points[0].branch == "constant"

    def test_round_trip(self, small_scan, tmp_path):
        path = tmp_path / "scan.csv"
        small_scan.write(path)
        back = ScanTable.read(path)
        assert [(p.e, p.t, p.s, p.branch) for p in back.points] == [
            (p.e, p.t, p.s, p.branch) for p in small_scan.points
        ]
        assert back.grid == small_scan.grid

    def test_csv_columns(self, small_scan):
        rows = list(csv.reader(io.StringIO(small_scan.to_csv())))
        assert rows[0] == ["e", "t", "s", "branch", "el_residual", "converged"]

    def test_thread_independent(self, small_scan):
        other = scan(GridSpec(0.2, 0.3, 2, 0.0, 0.02, 3), FAST, threads=2)
        assert other.to_csv() == small_scan.to_csv()


class TestTransitions:
    def test_smooth_path_has_no_flags(self):
        t = np.linspace(0, 1, 20)
        assert detect_transition(_path(0.2 - 0.01 * t**2)) == []

    def test_branch_change_at_midpoint(self):
        branches = ["bipartite-perturbative"] * 6 + ["numeric-other"] * 6
        pts = _path(np.linspace(0.2, 0.1, 12).tolist(), branches)
        flags = [f for f in detect_transition(pts) if f.kind == "branch"]
        assert len(flags) == 1
        assert flags[0].index == 5.5
        assert flags[0].t == pytest.approx(0.5 * (pts[5].t + pts[6].t))

    def test_kink_is_flagged(self):
        x = np.linspace(-1, 1, 21)
        s = 0.2 - 0.02 * np.abs(x) + 1e-4 * x**2
        flags = [f for f in detect_transition(_path(s.tolist())) if f.kind == "second-difference"]
        assert [f.index for f in flags] == [10.0]

    def test_needs_five_cells(self):
        with pytest.raises(DomainError):
            detect_transition(_path([0.1, 0.1, 0.1, 0.1]))

    def test_lookup_in_table(self, small_scan):
        cells = [(p.e, p.t) for p in small_scan.points]
        flags = detect_transition(cells, small_scan)
        assert isinstance(flags, list)


class TestLegendre:
    def test_picks_maximum(self):
        pts = [PhasePoint(0.3, 0.01, 0.2, "x"), PhasePoint(0.3, 0.02, 0.25, "x")]
        tab = ScanTable({"count": 2}, pts)
        psi, (e, t) = legendre(tab, 0.0, 0.0)
        assert (psi, t) == (0.25, 0.02)
        psi, (e, t) = legendre(tab, 0.0, -10.0)
        assert t == 0.01 and psi == pytest.approx(0.1)

    def test_nondecreasing_in_beta1(self, small_scan):
        psis = [legendre(small_scan, b1, -3.0)[0] for b1 in np.linspace(-5, 5, 21)]
        assert all(b >= a for a, b in zip(psis, psis[1:]))

    def test_empty(self):
        with pytest.raises(DomainError):
            legendre(ScanTable({"count": 1}, [PhasePoint(0.3, 0.01, math.nan, "x")]), 0, 0)


class TestRegion:
    def test_cusp_rows(self):
        rows = {round(r[0], 12): r for r in region_rows(1e-3)}
        for k in range(1, 6):
            ek = k / (k + 1)
            assert rows[round(ek, 12)][1] == pytest.approx(ek * (2 * ek - 1), abs=1e-9)

    def test_csv(self):
        text = emit_region(0.25)
        rows = list(csv.DictReader(io.StringIO(text)))
        assert rows[0].keys() == {"e", "t_lower", "t_upper", "transition_scallop", "transition_upper"}
        r = [x for x in rows if float(x["e"]) == 0.25][0]
        assert float(r["transition_upper"]) == pytest.approx(2 * 0.25**3)
        assert r["transition_scallop"] == ""
