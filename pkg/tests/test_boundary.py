import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphon_lab import DomainError, ResourceError, SingularParameterError
from graphon_lab.boundary import (
    analytic_candidates,
    asymmetric_family,
    asymmetric_family_params,
    bipartite_optimizer,
    boundary_curves,
    eps_from_t,
    feasible,
    lambda2_analytic,
    max_triangle,
    min_triangle,
    perturbative_coefficients,
    perturbative_entropy,
    perturbative_multipliers,
    perturbative_optimizer,
    perturbative_params,
    scallop_optimizer,
    scallop_params,
    scallop_value,
    second_derivative_in_c,
    transition_curve_scallop,
    transition_curve_upper,
)
from graphon_lab.graphon import edge_density, rate, rate_pointwise, triangle_density
from graphon_lab.solver import el_residual

LN2 = math.log(2.0)


def razborov(e):
    """Independent closed form of the minimal triangle density for e > 1/2."""
    k = math.floor(1 / (1 - e))
    s = math.sqrt(k * (k - e * (k + 1)))
    return (k - 1) * (k - 2 * s) * (k + s) ** 2 / (k**2 * (k + 1) ** 2)


# Frozen from razborov() above.
MIN_TRIANGLE_ORACLE = {
    0.55: 0.07301877674589714,
    0.6: 0.14150098817702936,
    0.7: 0.2870900555126419,
    0.75: 0.375,
    0.8: 0.48,
}


class TestFlat:
    @pytest.mark.parametrize("e", [0.0, 0.1, 0.25, 0.4, 0.5])
    def test_bipartite(self, e):
        g = bipartite_optimizer(e)
        assert edge_density(g) == pytest.approx(e, abs=1e-15)
        assert triangle_density(g) == 0.0
        assert rate(g) == pytest.approx(rate_pointwise(2 * e) / 2, abs=1e-15)

    def test_bipartite_domain(self):
        with pytest.raises(DomainError):
            bipartite_optimizer(0.6)


class TestScallop:
    @pytest.mark.parametrize("e", sorted(MIN_TRIANGLE_ORACLE))
    def test_min_triangle_oracle(self, e):
        assert min_triangle(e) == pytest.approx(MIN_TRIANGLE_ORACLE[e], abs=1e-12)

    @given(st.floats(0.501, 0.98))
    def test_min_triangle_matches_closed_form(self, e):
        assert min_triangle(e) == pytest.approx(razborov(e), abs=1e-10)

    @given(st.floats(0.501, 0.98))
    def test_construction(self, e):
        sp = scallop_params(e)
        g = scallop_optimizer(e)
        assert edge_density(g) == pytest.approx(e, abs=1e-10)
        assert triangle_density(g) == pytest.approx(min_triangle(e), abs=1e-12)
        assert 0 <= sp.p <= 1
        assert rate(g) == pytest.approx(scallop_value(e), abs=1e-12)
        assert scallop_value(e) == pytest.approx(sp.last_width**2 / 2 * rate_pointwise(sp.p), abs=1e-15)

    def test_p_at_0_6(self):
        # e = 0.6 sits on the second scallop: ell = 2
        sp = scallop_params(0.6)
        assert sp.ell == 2
        assert sp.p == pytest.approx(0.682550, abs=1e-6)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_cusps(self, k):
        e = k / (k + 1)
        assert min_triangle(e) == pytest.approx(e * (2 * e - 1), abs=1e-9)
        if k > 1:
            # complete (k+1)-partite: the corner is a full bipartite block
            assert scallop_params(e).p == pytest.approx(1.0, abs=1e-9)

    def test_continuity_across_cusps(self):
        for k in (2, 3, 4):
            e = k / (k + 1)
            assert min_triangle(e - 1e-9) == pytest.approx(min_triangle(e + 1e-9), abs=1e-7)

    def test_domain(self):
        with pytest.raises(DomainError):
            scallop_params(0.4)

    def test_part_guard(self):
        assert min_triangle(1 - 1e-9) == pytest.approx(1.0, abs=1e-8)
        with pytest.raises(ResourceError):
            scallop_optimizer(1 - 1e-9)


class TestRegion:
    @given(st.floats(0, 1))
    def test_boundaries_ordered(self, e):
        assert min_triangle(e) <= max_triangle(e) + 1e-15

    def test_feasible(self):
        assert feasible(0.3, 0.0)
        assert feasible(0.3, 0.3**1.5)
        assert not feasible(0.3, 0.2)
        assert not feasible(0.6, 0.1)
        assert not feasible(1.2, 0.5)

    def test_curves_tags(self):
        rows = boundary_curves(0.1)
        tags = {r[2] for r in rows}
        assert tags == {"upper", "flat", "scallop", "transition_scallop", "transition_upper"}

    def test_transition_curves(self):
        assert transition_curve_upper(0.3) == pytest.approx(0.054)
        eps = 0.1
        e = (1 + eps) / 2
        assert transition_curve_scallop(e) == pytest.approx((eps**3 + 3 * eps) / 4)
        # the perturbative family meets the transition curve where 2e - eps = 1
        assert e**3 - (e - eps) ** 3 == pytest.approx(transition_curve_scallop(e))


class TestPerturbative:
    def test_entropy_oracle(self):
        # independent evaluation: eps = 0.05 gives t = 0.007625 at e = 0.25
        assert perturbative_entropy(0.25, 0.05) == pytest.approx(0.22166351426486525, abs=1e-12)
        assert perturbative_params(0.25, 0.05).t == pytest.approx(0.007625, abs=1e-15)

    def test_symmetric_point(self):
        # eps = e is the constant graphon: s = -I0(e)
        assert perturbative_entropy(0.25, 0.25) == pytest.approx(0.281167572, abs=1e-9)

    def test_flat_limit(self):
        assert perturbative_entropy(0.25, 0.0) == pytest.approx(-rate_pointwise(0.5) / 2)

    @given(st.floats(0.05, 0.45), st.floats(0.0, 1.0))
    def test_eps_round_trip(self, e, frac):
        eps = frac * 2 * e
        t = e**3 - (e - eps) ** 3
        assert eps_from_t(e, t) == pytest.approx(eps, abs=1e-9)

    @given(st.floats(0.05, 0.45), st.floats(0.01, 0.95))
    def test_densities(self, e, frac):
        eps = frac * e
        g = perturbative_optimizer(e, eps)
        assert edge_density(g) == pytest.approx(e, abs=1e-14)
        assert triangle_density(g) == pytest.approx(e**3 - (e - eps) ** 3, abs=1e-14)
        assert -rate(g) == pytest.approx(perturbative_entropy(e, eps), abs=1e-14)

    @given(st.floats(0.1, 0.45), st.floats(0.02, 0.9))
    def test_euler_lagrange(self, e, frac):
        eps = frac * e
        l1, l2 = perturbative_multipliers(e, eps)
        g = perturbative_optimizer(e, eps)
        assert el_residual(g, l1, l2) <= 1e-9

    def test_lambda2_singular_at_constant(self):
        with pytest.raises(SingularParameterError):
            lambda2_analytic(0.25, 0.25)

    def test_coefficients_positive_slack(self):
        c1, c2, c3 = perturbative_coefficients(0.25, 1e-3)
        assert c1 * c2 - c3**2 == pytest.approx(64.3, abs=0.1)

    def test_domain(self):
        with pytest.raises(DomainError):
            perturbative_optimizer(0.25, 0.6)
        with pytest.raises(DomainError):
            eps_from_t(0.25, 0.1)


class TestAsymmetricFamily:
    @pytest.mark.parametrize("e,t", [(0.25, 5e-4), (0.3, 1e-3)])
    def test_half_reproduces_perturbative(self, e, t):
        g = asymmetric_family(0.5, e, t)
        p = perturbative_optimizer(e, eps_from_t(e, t))
        np.testing.assert_allclose(g.values, p.values, atol=1e-10)

    @pytest.mark.parametrize("c", [0.4, 0.45, 0.55, 0.62])
    def test_constraints_hold(self, c):
        e, t = 0.25, 5e-4
        g = asymmetric_family(c, e, t)
        assert edge_density(g) == pytest.approx(e, abs=1e-10)
        assert triangle_density(g) == pytest.approx(t, abs=1e-10)

    def test_zero_triangle_member(self):
        ap = asymmetric_family_params(0.4, 0.2, 0.0)
        assert ap.alpha == ap.beta == 0.0
        assert ap.p == pytest.approx(0.2 / (2 * 0.4 * 0.6))

    # frozen from a Richardson-refined difference at h = 1e-3
    @pytest.mark.parametrize("e,t,expected", [(0.25, 5e-4, 1.27446), (0.3, 1e-3, 1.66982)])
    def test_second_derivative(self, e, t, expected):
        est = second_derivative_in_c(e, t)
        assert est.value == pytest.approx(expected, abs=1e-4)
        assert est.value >= 16 * e**2 - 0.05
        assert est.error < 1e-3

    def test_guard(self):
        with pytest.raises(DomainError):
            second_derivative_in_c(0.25, 0.01)


class TestCandidates:
    def test_on_constant_curve(self):
        tags = [tag for tag, _ in analytic_candidates(0.3, 0.027)]
        assert tags[0] == "constant"
        assert "bipartite-perturbative" in tags

    def test_on_scallop(self):
        e = 0.6
        tags = [tag for tag, _ in analytic_candidates(e, min_triangle(e))]
        assert tags == ["scallop-2"]

    def test_upper_region_has_none(self):
        assert analytic_candidates(0.3, 0.06) == []

    def test_outside_open_interval(self):
        assert analytic_candidates(0.0, 0.0) == []
        assert analytic_candidates(1.0, 1.0) == []
