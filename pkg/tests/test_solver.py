import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graphon_lab import ConvergenceError, DomainError, ShapeMismatchError, StepGraphon
from graphon_lab.boundary import (
    lambda2_analytic,
    perturbative_multipliers,
    perturbative_optimizer,
)
from graphon_lab.graphon import edge_density, rate, rate_pointwise, triangle_density
from graphon_lab.solver import (
    SolveConfig,
    el_residual,
    fit_multipliers,
    functional_gradients,
    minimize_rate,
    second_variation,
    second_variation_min_ratio,
    tangent_projection,
)

LN2 = math.log(2.0)


def _sym(A):
    return np.triu(A) + np.triu(A, 1).T


@st.composite
def interior_graphons(draw, m=5):
    A = draw(arrays(np.float64, (m, m), elements=st.floats(0.05, 0.95)))
    return StepGraphon.from_values(_sym(A))


@st.composite
def symmetric_deltas(draw, m=5):
    return _sym(draw(arrays(np.float64, (m, m), elements=st.floats(-1, 1))))


@pytest.fixture(scope="module")
def flat_result():
    return minimize_rate(0.25, 0.0, SolveConfig(m=16, starts=8, seed=0))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"m": 1}, {"starts": 0}, {"tol_c": 0}, {"growth": 1.0}, {"mu0": 0}, {"threads": 0}],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(DomainError):
            SolveConfig(**kwargs)


class TestGradients:
    @given(interior_graphons(), symmetric_deltas())
    def test_against_finite_differences(self, g, D):
        dI, de, dt = functional_gradients(g)
        h = 1e-6
        gp = StepGraphon(g.boundaries, g.values + h * D)
        gm = StepGraphon(g.boundaries, g.values - h * D)
        for F, dF in ((rate, dI), (edge_density, de), (triangle_density, dt)):
            fd = (F(gp) - F(gm)) / (2 * h)
            an = float(np.sum(g.cell_weights * dF * D))
            assert fd == pytest.approx(an, rel=1e-6, abs=1e-9)

    @given(interior_graphons(), symmetric_deltas())
    def test_tangent_projection_kills_first_order_change(self, g, D):
        P = tangent_projection(g, D)
        _, de, dt = functional_gradients(g)
        assert abs(np.sum(g.cell_weights * de * P)) < 1e-12
        assert abs(np.sum(g.cell_weights * dt * P)) < 1e-12
        np.testing.assert_allclose(tangent_projection(g, P), P, atol=1e-12)


class TestSecondVariation:
    @given(interior_graphons(), symmetric_deltas(), st.floats(-3, 3), st.floats(-5, 5))
    def test_quadratic_in_delta(self, g, D, a, lam2):
        assert second_variation(g, a * D, lam2) == pytest.approx(
            a * a * second_variation(g, D, lam2), rel=1e-9, abs=1e-12
        )

    def test_matches_taylor_expansion_along_tangent_curve(self):
        # I(g + s D) - I(g) + lambda terms is quadratic with this coefficient
        g = perturbative_optimizer(0.25, 0.05).refine(np.linspace(0, 1, 5))
        l1, l2 = perturbative_multipliers(0.25, 0.05)
        rng = np.random.default_rng(3)
        D = _sym(rng.uniform(-1, 1, (4, 4)))
        s = 1e-4

        def lagr(x):
            gg = StepGraphon(g.boundaries, g.values + x * D)
            return rate(gg) + l1 * edge_density(gg) + l2 * triangle_density(gg)

        fd = (lagr(s) - 2 * lagr(0.0) + lagr(-s)) / s**2
        assert 0.5 * fd == pytest.approx(second_variation(g, D, l2), rel=1e-5)

    def test_shape_checks(self):
        g = StepGraphon.constant(0.3, m=2)
        with pytest.raises(ShapeMismatchError):
            second_variation(g, np.zeros((3, 3)), 1.0)
        with pytest.raises(ShapeMismatchError):
            second_variation(g, np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)

    def test_min_ratio_small_eps(self):
        g = perturbative_optimizer(0.25, 0.02).refine(np.linspace(0, 1, 9))
        assert second_variation_min_ratio(g, lambda2_analytic(0.25, 0.02)) > 0.5


class TestMultipliers:
    @pytest.mark.parametrize("e,eps", [(0.25, 0.05), (0.3, 0.1)])
    def test_fit_recovers_analytic(self, e, eps):
        g = perturbative_optimizer(e, eps)
        l1, l2 = fit_multipliers(g)
        a1, a2 = perturbative_multipliers(e, eps)
        assert l1 == pytest.approx(a1, rel=1e-8)
        assert l2 == pytest.approx(a2, rel=1e-8)

    def test_constant_uses_fallback(self):
        g = StepGraphon.constant(0.3, m=3)
        l1, l2 = fit_multipliers(g, lambda2_fallback=2.0)
        assert l2 == 2.0
        assert el_residual(g, l1, l2) < 1e-12

    def test_no_interior_cells(self):
        g = StepGraphon([0, 0.5, 1], [[0, 1], [1, 0]])
        assert el_residual(g, 0.0, 0.0) == 0.0
        assert all(math.isnan(x) for x in fit_multipliers(g))


class TestMinimizeRate:
    def test_flat_value(self, flat_result):
        assert flat_result.value == pytest.approx(-LN2 / 4, abs=1e-5)
        assert flat_result.on_boundary

    def test_constraints_and_consistency(self, flat_result):
        g = flat_result.graphon
        assert edge_density(g) == pytest.approx(0.25, abs=1e-7)
        assert triangle_density(g) == pytest.approx(0.0, abs=1e-7)
        assert flat_result.value == pytest.approx(rate(g), abs=1e-15)
        assert max(flat_result.constraint_residuals) <= 1e-7

    def test_inner_solves_decrease_merit(self, flat_result):
        for before, after, *_ in flat_result.history:
            assert after <= before + 1e-12

    def test_best_start_is_reported(self, flat_result):
        best = flat_result.starts[flat_result.start_index]
        assert best.converged
        converged = [s.value for s in flat_result.starts if s.converged]
        assert best.value <= min(converged) + 1e-10

    def test_constant_curve(self):
        r = minimize_rate(0.3, 0.027, SolveConfig(m=8, starts=3, seed=0))
        assert r.value == pytest.approx(rate_pointwise(0.3), abs=1e-6)
        assert r.el_residual_sup < 1e-4

    def test_serializes(self, flat_result):
        d = flat_result.to_dict()
        assert StepGraphon.from_dict(d["graphon"]) == flat_result.graphon
        assert len(d["starts"]) == 8

    def test_deterministic_and_thread_independent(self):
        cfg = SolveConfig(m=8, starts=4, seed=3)
        a = minimize_rate(0.2, 0.004, cfg)
        b = minimize_rate(0.2, 0.004, SolveConfig(m=8, starts=4, seed=3, threads=2))
        assert a.value == b.value
        np.testing.assert_array_equal(a.graphon.values, b.graphon.values)

    def test_infeasible(self):
        with pytest.raises(DomainError):
            minimize_rate(0.3, 0.5)
        with pytest.raises(DomainError):
            minimize_rate(0.6, 0.0)

    def test_convergence_error_carries_diagnostics(self):
        cfg = SolveConfig(m=6, starts=2, seed=0, max_outer=1, max_inner=2, tol_g=1e-14)
        with pytest.raises(ConvergenceError) as info:
            minimize_rate(0.3, 0.06, cfg)
        assert len(info.value.diagnostics) == 2
