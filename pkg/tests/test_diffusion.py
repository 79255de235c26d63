import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from tacfit.diffusion import (
    BracCurve,
    ParamQ,
    SystemTemplate,
    discretize_pde,
    g_matrix,
    g_matrix_series,
    realize,
    tac,
    tac_grad,
    tac_grad_series,
    tac_series,
)
from tacfit.errors import DimensionError, DomainError
from tacfit.simkit import MMParams, mm_brac


def scalar_template():
    """k = 1 with A = -q1, B = q2 and C = 1."""
    return SystemTemplate(k=1, D=[[-1.0]], E=[[0.0]], F=[[1.0]], C=[[1.0]], label="scalar")


def ode_reference(real, mu, t_eval):
    """Integrate x' = A x + B mu segment by segment with a tight explicit solver."""
    A, b, c = real.A, real.B[:, 0], real.C[0]
    x = np.zeros(real.k)
    out = {}
    edges = mu.edges
    for seg in range(mu.n_segments):
        lo, hi = edges[seg], edges[seg + 1]
        level = mu.levels[seg]
        points = sorted({t for t in t_eval if lo < t < hi} | {hi})
        sol = solve_ivp(
            lambda _, z: A @ z + b * level,
            (lo, hi),
            x,
            method="DOP853",
            rtol=1e-12,
            atol=1e-15,
            t_eval=points,
        )
        for t, z in zip(points, sol.y.T):
            out[t] = float(c @ z)
        x = sol.y[:, -1]
    return np.array([out[t] for t in t_eval])


class TestParamQ:
    def test_parse_and_iterate(self):
        q = ParamQ.parse(" 0.5, 2 ")
        assert tuple(q) == (0.5, 2.0)
        np.testing.assert_array_equal(q.as_array(), [0.5, 2.0])

    @pytest.mark.parametrize("q1, q2", [(1.0, 0.0), (1.0, -1.0), (float("nan"), 1.0)])
    def test_rejects_outside_admissible_set(self, q1, q2):
        with pytest.raises(DomainError):
            ParamQ(q1, q2)

    def test_negative_q1_is_admissible(self):
        assert ParamQ(-0.5, 1.0).q1 == -0.5

    def test_from_array_needs_two_entries(self):
        with pytest.raises(DimensionError):
            ParamQ.from_array([1.0, 2.0, 3.0])


class TestBracCurve:
    def test_uniform_segments(self):
        mu = BracCurve.uniform(2.0, [0.0, 1.0, 3.0, 0.5])
        np.testing.assert_allclose(mu.breakpoints, [0.0, 0.5, 1.0, 1.5])
        np.testing.assert_allclose(mu.level_at([0.0, 0.49, 0.5, 1.99, 2.0]), [0.0, 0.0, 1.0, 0.5, 0.5])
        assert mu.n_segments == 4
        assert not mu.is_zero

    def test_zeros(self):
        assert BracCurve.zeros(1.0, segments=5).is_zero

    @pytest.mark.parametrize("breakpoints, levels, error", [
        ([0.1, 0.5], [1.0, 1.0], DomainError),
        ([0.0, 0.5, 0.4], [1.0, 1.0, 1.0], DomainError),
        ([0.0, 1.0], [1.0, 1.0], DomainError),
        ([0.0, 0.5], [1.0], DimensionError),
        ([0.0, 0.5], [1.0, -0.1], DomainError),
    ])
    def test_rejects_invalid(self, breakpoints, levels, error):
        with pytest.raises(error):
            BracCurve(1.0, np.array(breakpoints), np.array(levels))


class TestTemplate:
    @pytest.mark.parametrize("k", [2, 4, 32])
    def test_discretize_pde_shapes(self, k):
        template = discretize_pde(k)
        assert template.D.shape == (k, k)
        assert template.F.shape == (k, 1)
        assert template.C.shape == (1, k)
        np.testing.assert_array_equal(template.D, template.D.T)
        # Pure diffusion conserves mass: the rows of D sum to zero
        np.testing.assert_allclose(template.D.sum(axis=1), 0.0, atol=1e-9)
        assert template.F[-1, 0] > 0 and template.C[0, 0] == 1.0

    def test_discretize_pde_rejects_small_k(self):
        with pytest.raises(DomainError):
            discretize_pde(1)

    def test_realize_is_affine_in_q(self, pde4):
        real = realize(pde4, ParamQ(0.6, 1.7))
        np.testing.assert_allclose(real.A, 0.6 * pde4.D + pde4.E)
        np.testing.assert_allclose(real.B, 1.7 * pde4.F)

    def test_template_rejects_shape_mismatch(self):
        with pytest.raises(DimensionError):
            SystemTemplate(k=2, D=np.eye(2), E=np.zeros((2, 2)), F=np.ones((3, 1)), C=[[1.0, 0.0]])


class TestForward:
    def test_zero_input_gives_zero_output(self, pde4, q0):
        mu = BracCurve.zeros(1.0, segments=10)
        np.testing.assert_array_equal(tac_series(realize(pde4, q0), mu, [0.1, 0.5, 1.0]), 0.0)

    def test_output_at_time_zero(self, pde4, q0, hat_curve):
        assert tac(realize(pde4, q0), hat_curve, 0.0) == 0.0

    @pytest.mark.parametrize("q1, q2", [(0.5, 1.0), (2.0, 0.3)])
    def test_scalar_closed_form(self, q1, q2):
        c = 0.04
        mu = BracCurve.constant(1.0, c)
        real = realize(scalar_template(), ParamQ(q1, q2))
        for t in (0.1, 0.5, 1.0):
            expected = q2 * c * (1.0 - math.exp(-q1 * t)) / q1
            assert tac(real, mu, t) == pytest.approx(expected, rel=1e-12)

    def test_single_drink_closed_form(self, single_drink):
        q1, q2, c = 0.7, 1.3, 0.05
        mu = BracCurve.constant(2.0, c, segments=7)
        real = realize(single_drink, ParamQ(q1, q2))
        t = 1.6
        assert tac(real, mu, t) == pytest.approx(q2 * c * (math.exp(q1 * t) - 1.0) / q1, rel=1e-12)

    @pytest.mark.parametrize("k", [4, 8])
    def test_matches_ode_integration(self, k, hat_curve):
        template = discretize_pde(k)
        real = realize(template, ParamQ(1.0, 1.0))
        times = [0.35, 0.9, 1.25, 2.0]
        ours = tac_series(real, hat_curve, times)
        reference = ode_reference(real, hat_curve, times)
        assert np.max(np.abs(ours - reference)) <= 1e-8 * np.max(np.abs(reference))

    def test_series_matches_pointwise_in_any_order(self, pde4, q0, hat_curve):
        real = realize(pde4, q0)
        times = np.array([1.7, 0.2, 1.0, 0.2, 2.0])
        series = tac_series(real, hat_curve, times)
        pointwise = np.array([tac(real, hat_curve, t) for t in times])
        np.testing.assert_allclose(series, pointwise, rtol=1e-12, atol=1e-16)

    def test_output_is_causal(self, pde4, q0, hat_curve):
        # Segments from t = 1.0 on are raised; earlier readings must not move
        levels = hat_curve.levels.copy()
        levels[10:] += 0.05
        real = realize(pde4, q0)
        times = [0.3, 0.75, 1.0, 1.5]
        before = tac_series(real, hat_curve, times)
        after = tac_series(real, hat_curve.with_levels(levels), times)
        np.testing.assert_allclose(after[:3], before[:3], rtol=1e-14, atol=0)
        assert after[3] > before[3]

    def test_output_is_linear_in_the_input(self, pde4, hat_curve):
        real = realize(pde4, ParamQ(0.8, 1.4))
        other = hat_curve.with_levels(np.linspace(0.05, 0.0, hat_curve.n_segments))
        times = [0.4, 1.1, 2.0]
        combined = tac_series(real, hat_curve.with_levels(2.0 * hat_curve.levels + 0.5 * other.levels), times)
        expected = 2.0 * tac_series(real, hat_curve, times) + 0.5 * tac_series(real, other, times)
        np.testing.assert_allclose(combined, expected, rtol=1e-12, atol=1e-16)

    @pytest.mark.parametrize("k", [4, 32])
    def test_refined_segments_give_the_same_output(self, k, hat_curve):
        halves = np.sort(np.concatenate([hat_curve.breakpoints, hat_curve.breakpoints + 0.05]))
        refined = BracCurve(hat_curve.horizon_T, halves, np.repeat(hat_curve.levels, 2))
        real = realize(discretize_pde(k), ParamQ(1.0, 1.0))
        times = [0.33, 1.0, 1.77, 2.0]
        np.testing.assert_allclose(
            tac_series(real, refined, times), tac_series(real, hat_curve, times), rtol=1e-12, atol=1e-16
        )

    def test_single_drink_response_at_k32(self):
        # Long enough horizon for the BrAC to clear and the TAC to fall back
        mu = mm_brac(MMParams(), 8.0)
        real = realize(discretize_pde(32), ParamQ(0.6341, 0.7826))
        f = tac_series(real, mu, np.linspace(0.0, 8.0, 401))
        tol = 1e-10 * f.max()
        assert f.max() > 0
        assert np.all(f >= -tol)
        peak = int(np.argmax(f))
        assert 0 < peak < f.size - 1
        assert np.all(np.diff(f[:peak + 1]) >= -tol)
        assert np.all(np.diff(f[peak:]) <= tol)

    @pytest.mark.parametrize("case", range(20))
    def test_matches_fine_riemann_sum(self, case, single_drink):
        # Midpoint sum of C e^{(t-s)A} B mu(s) over 10^6 panels aligned with the breakpoints
        rng = np.random.default_rng(500 + case)
        template = single_drink if case % 4 == 3 else discretize_pde((2, 4, 8)[case % 4])
        real = realize(template, ParamQ(rng.uniform(0.3, 1.2), rng.uniform(0.5, 2.0)))
        mu = BracCurve.uniform(2.0, rng.uniform(0.01, 0.08, 20))
        t = float(rng.choice([0.5, 0.8, 1.0, 2.0]))

        panels = 1_000_000
        h = t / panels
        s = (np.arange(panels) + 0.5) * h
        lam, V = np.linalg.eigh(real.A)
        weights = (real.C @ V)[0] * (V.T @ real.B)[:, 0]
        kernel = np.exp(np.outer(t - s, lam)) @ weights
        riemann = h * float(kernel @ mu.level_at(s))

        assert abs(tac(real, mu, t) - riemann) <= 1e-8 * abs(riemann)

    @pytest.mark.parametrize("t", [-0.1, 2.5, float("nan")])
    def test_rejects_times_outside_horizon(self, pde4, q0, hat_curve, t):
        with pytest.raises(DomainError):
            tac_series(realize(pde4, q0), hat_curve, [t])


class TestGradient:
    def test_value_matches_forward_model(self, pde4, hat_curve):
        q = ParamQ(0.8, 1.4)
        times = [0.5, 1.0, 1.5, 2.0]
        f, _, _ = tac_grad_series(pde4, q, hat_curve, times)
        np.testing.assert_allclose(f, tac_series(realize(pde4, q), hat_curve, times), rtol=1e-11)

    @pytest.mark.parametrize("k", [2, 8, 32])
    def test_q2_partial_identity(self, k, hat_curve):
        # 20 draws of (q, mu) with 17 times each, about a thousand points over the three sizes
        template = discretize_pde(k)
        rng = np.random.default_rng(40 + k)
        for _ in range(20):
            q = ParamQ(rng.uniform(0.2, 3.0), rng.uniform(0.1, 3.0))
            mu = hat_curve.with_levels(rng.uniform(0.0, 0.1, hat_curve.n_segments))
            f, _, df2 = tac_grad_series(template, q, mu, rng.uniform(0.0, 2.0, 17))
            assert np.all(np.abs(q.q2 * df2 - f) <= 1e-12 * (np.abs(f) + 1.0))

    @pytest.mark.parametrize("q1", [0.3, 1.0, 3.0])
    def test_q1_partial_matches_central_difference(self, pde4, hat_curve, q1):
        q2 = 1.2
        h = 1e-6 * q1
        t = 1.5
        g = tac_grad(pde4, ParamQ(q1, q2), hat_curve, t)
        up = tac(realize(pde4, ParamQ(q1 + h, q2)), hat_curve, t)
        down = tac(realize(pde4, ParamQ(q1 - h, q2)), hat_curve, t)
        fd = (up - down) / (2 * h)
        assert g.df_dq1 == pytest.approx(fd, rel=1e-6)

    def test_gradient_property(self, pde4, q0, hat_curve):
        g = tac_grad(pde4, q0, hat_curve, 1.0)
        np.testing.assert_array_equal(g.gradient, [g.df_dq1, g.df_dq2])

    def test_single_drink_sensitivity_closed_form(self, single_drink):
        # f = q2 c (e^{q1 t} - 1)/q1, so df/dq1 = q2 c (t e^{q1 t}/q1 - (e^{q1 t} - 1)/q1^2)
        q1, q2, c, t = 0.7, 1.3, 0.05, 1.6
        mu = BracCurve.constant(2.0, c)
        g = tac_grad(single_drink, ParamQ(q1, q2), mu, t)
        e = math.exp(q1 * t)
        assert g.df_dq1 == pytest.approx(q2 * c * (t * e / q1 - (e - 1.0) / q1 ** 2), rel=1e-11)

    def test_g_matrix_is_rank_one_psd(self, pde4, q0, hat_curve):
        G = g_matrix(pde4, q0, hat_curve, 1.3)
        np.testing.assert_allclose(G, G.T)
        evals = np.linalg.eigvalsh(G)
        assert evals[0] >= -1e-12 * evals[1]
        assert abs(np.linalg.det(G)) <= 1e-12 * np.trace(G) ** 2

    def test_g_matrix_series_shape(self, pde4, q0, hat_curve):
        assert g_matrix_series(pde4, q0, hat_curve, [0.5, 1.0, 1.5]).shape == (3, 2, 2)
