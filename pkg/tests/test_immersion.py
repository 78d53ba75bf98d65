"""
Tests for the second fundamental form coefficients
"""

import math

import numpy as np
import pytest

from pss_lab.config import settings
from pss_lab.errors import GuardStop, ParameterError
from pss_lab.models.fields import Grid1D, ImmersionParams
from pss_lab.models.schemas import Provenance, SineMode
from pss_lab.services.chsolver import initial_state, interpolate_jets
from pss_lab.services.immersion import (
    codazzi_fields,
    codazzi_residuals,
    coefficient_ode_residual,
    coeffs_frame,
    curvature_diagnostics,
    mu0_coeffs,
    mu0_strip,
    munz_denominator,
    munz_phi,
    munz_rhs,
    munz_solve,
    sample,
    second_fundamental_form,
    solve_coefficients,
)

from .conftest import constant_jets

BUMP = [SineMode(mode=0, amplitude=1.0, phase=math.pi / 2), SineMode(mode=1, amplitude=0.5)]


class TestStrip:

    @pytest.mark.parametrize("C,beta", [(5.0, 1.0), (3.0, 1.0), (5.0, 2.0)])
    def test_endpoints(self, C, beta):
        root = math.sqrt(C ** 2 - 4 * beta ** 2)
        lower, upper = mu0_strip(C, beta)
        assert lower == pytest.approx(0.5 * math.log((C - root) / (2 * beta ** 2)), abs=1e-12)
        assert upper == pytest.approx(0.5 * math.log((C + root) / (2 * beta ** 2)), abs=1e-12)

    @pytest.mark.parametrize("C", [3.0, 5.0])
    def test_unit_beta_strip_is_symmetric(self, C):
        lower, upper = mu0_strip(C, 1.0)
        assert lower == pytest.approx(-upper, abs=1e-12)
        assert upper == pytest.approx(math.acosh(C / 2) / 2, abs=1e-12)

    @pytest.mark.parametrize("C,beta", [(2.0, 1.0), (-5.0, 1.0), (5.0, 0.0)])
    def test_empty_strip(self, C, beta):
        with pytest.raises(ParameterError):
            mu0_strip(C, beta)

    def test_params_validation(self):
        with pytest.raises(ParameterError):
            ImmersionParams(mu=0.0, beta=1.0, C_strip=2.0)
        with pytest.raises(ParameterError):
            ImmersionParams(mu=1.0, beta=0.0)
        with pytest.raises(ParameterError):
            ImmersionParams(mu=1.0, beta=1.0, a_sign=0)


class TestClosedForm:

    def test_values_at_origin(self):
        coeffs = mu0_coeffs(5.0, 1.0, 1, np.array([0.0]))
        assert coeffs.a[0] == pytest.approx(math.sqrt(3))
        assert coeffs.b[0] == pytest.approx(-1.0)
        assert coeffs.c[0] == pytest.approx(0.0, abs=1e-14)
        assert coeffs.mean_curvature[0] == pytest.approx(math.sqrt(3) / 2)
        assert coeffs.provenance == Provenance.CLOSED_MU0

    def test_outside_strip(self):
        with pytest.raises(ParameterError):
            mu0_coeffs(5.0, 1.0, 1, np.array([0.0, 0.9]))

    @pytest.mark.parametrize("a_sign", [1, -1])
    def test_gauss_and_codazzi(self, a_sign):
        lower, upper = mu0_strip(5.0, 1.0)
        xs = np.linspace(lower + 0.01, upper - 0.01, 101)
        coeffs = mu0_coeffs(5.0, 1.0, a_sign, xs)
        assert np.max(np.abs(coeffs.gauss_residual)) <= 1e-10
        r1, r2 = codazzi_fields(coeffs)
        assert np.max(np.abs(r1)) <= 1e-10
        assert np.max(np.abs(r2)) <= 1e-10

    def test_default_nodes_cover_strip(self, strip_params):
        coeffs = solve_coefficients(strip_params, nodes=51)
        lower, upper = mu0_strip(5.0, 1.0)
        assert coeffs.x.size == 51
        assert lower < coeffs.x[0] < coeffs.x[-1] < upper

    def test_reports_pass(self, strip_params):
        coeffs = solve_coefficients(strip_params, xs=np.linspace(-0.5, 0.5, 41))
        assert codazzi_residuals(coeffs).passed
        report = curvature_diagnostics(coeffs)
        assert report.passed
        assert [check.name for check in report.checks] == ["gauss-identity"]

    def test_full_codazzi_on_solver_jets(self):
        state = initial_state(Grid1D(2 * math.pi, 64), BUMP)
        xs = np.linspace(0.0, 0.5, 21)
        jets = interpolate_jets(state, xs)
        coeffs = mu0_coeffs(5.0, 1.0, 1, xs)
        report = codazzi_residuals(coeffs, jets)
        assert report.passed, report.failed()
        assert len(report.checks) == 4


class TestCoefficientOde:

    def test_initial_slope(self, ode_params):
        expected = (6 * math.sqrt(6) - 2) / (6 + 2 * math.sqrt(6))
        assert munz_rhs(ode_params, 0.0, 1.5) == pytest.approx(expected)
        assert expected == pytest.approx(1.1650, abs=1e-4)

    def test_solve(self, ode_params):
        coeffs = munz_solve(ode_params, 0.0, 1.5, 0.5)
        assert coeffs.stop_reason == "completed"
        assert coeffs.provenance == Provenance.ODE_MUNZ
        assert coeffs.x[-1] == pytest.approx(0.5)
        assert coeffs.b[0] == pytest.approx(1.5)
        assert coeffs.b_x[0] == pytest.approx(1.1650, abs=1e-4)
        assert np.max(np.abs(coeffs.gauss_residual)) <= 1e-10

    def test_codazzi_and_curvature(self, ode_params):
        coeffs = munz_solve(ode_params, 0.0, 1.5, 0.5)
        assert codazzi_residuals(coeffs).passed
        report = curvature_diagnostics(coeffs)
        assert report.passed, report.failed()
        np.testing.assert_allclose(coeffs.mean_curvature, np.sqrt(coeffs.delta) / 2, atol=1e-12)

    def test_polynomial_residual(self, ode_params):
        coeffs = munz_solve(ode_params, 0.0, 1.5, 0.5, nodes=401)
        slope = np.gradient(coeffs.b, coeffs.x, edge_order=2)
        residual = coefficient_ode_residual(ode_params, coeffs.x, coeffs.b, slope)
        assert np.max(np.abs(residual)) <= 1e-2
        exact = coefficient_ode_residual(ode_params, coeffs.x, coeffs.b, coeffs.b_x)
        assert np.max(np.abs(exact)) <= 1e-12

    def test_stops_where_delta_degenerates(self, ode_params):
        coeffs = munz_solve(ode_params, 0.0, 0.9, -0.5)
        assert coeffs.stop_reason == "delta_degenerate"
        assert -0.5 < coeffs.x[-1] < 0.0
        assert np.all(coeffs.delta > 0)

    def test_halving_tolerance_barely_moves_b(self, ode_params):
        coarse = munz_solve(ode_params, 0.0, 1.5, 0.5, rtol=1e-8, atol=1e-10)
        fine = munz_solve(ode_params, 0.0, 1.5, 0.5, rtol=5e-9, atol=5e-11)
        np.testing.assert_array_equal(coarse.x, fine.x)
        scale = max(1.0, float(np.max(np.abs(fine.b))))
        assert np.max(np.abs(coarse.b - fine.b)) <= 10 * 1e-8 * scale

    @pytest.mark.parametrize("b0,span", [(1.5, 0.5), (1.5, -0.5), (0.9, -0.5)])
    def test_denominator_keeps_its_sign(self, ode_params, b0, span):
        coeffs = munz_solve(ode_params, 0.0, b0, span)
        assert np.all(coeffs.phi_aux ** 2 + 4 * coeffs.b ** 2 > 0)
        np.testing.assert_allclose(coeffs.phi_aux, munz_phi(ode_params, coeffs.x, coeffs.b), atol=1e-12)
        denominator = munz_denominator(ode_params, coeffs.x, coeffs.b)
        assert np.all(np.sign(denominator) == np.sign(denominator[0]))
        assert np.min(np.abs(denominator)) > 0.5 * settings.den_eps

    @pytest.mark.parametrize("b0,span", [(0.0, 0.5), (1.5, 0.0)])
    def test_bad_start(self, ode_params, b0, span):
        with pytest.raises(ParameterError):
            munz_solve(ode_params, 0.0, b0, span)

    def test_needs_nonzero_mu(self, strip_params):
        with pytest.raises(ParameterError):
            munz_solve(strip_params, 0.0, 1.5, 0.5)

    def test_sample(self, ode_params):
        coeffs = munz_solve(ode_params, 0.0, 1.5, 0.5)
        local = sample(coeffs, np.array([0.0, 0.25]))
        assert local.b[0] == pytest.approx(1.5)
        assert local.a[1] == pytest.approx(float(np.interp(0.25, coeffs.x, coeffs.a)), rel=1e-4)
        with pytest.raises(ParameterError):
            sample(coeffs, np.array([0.6]))


class TestSecondFundamentalForm:

    def test_constant_solution(self):
        coeffs = mu0_coeffs(5.0, 1.0, 1, np.array([0.0]))
        jets = constant_jets(1.0, np.array([0.0]))
        pi_xx, pi_xt, pi_tt = second_fundamental_form(coeffs.a, coeffs.b, coeffs.c, jets, 0.0, mask_eps=0.0)
        assert pi_xx[0] == pytest.approx(math.sqrt(3) - 2)
        assert pi_xt[0] == pytest.approx(0.0, abs=1e-14)
        assert pi_tt[0] == pytest.approx(0.0, abs=1e-14)

    def test_non_generic_point_is_masked(self):
        coeffs = mu0_coeffs(5.0, 1.0, 1, np.array([0.0]))
        jets = constant_jets(1.0, np.array([0.0]))
        with pytest.raises(GuardStop) as info:
            second_fundamental_form(coeffs.a, coeffs.b, coeffs.c, jets, 0.0)
        assert info.value.reason == "masked"
        assert info.value.details["index"] == (0,)


class TestFrames:

    def test_closed_form_columns(self):
        coeffs = mu0_coeffs(5.0, 1.0, 1, np.linspace(-0.5, 0.5, 5))
        frame = coeffs_frame(coeffs)
        assert list(frame.columns) == ["x", "a", "b", "c", "H", "gauss", "status"]
        np.testing.assert_allclose(frame["gauss"], -1.0, atol=1e-10)

    def test_ode_columns(self, ode_params):
        frame = coeffs_frame(munz_solve(ode_params, 0.0, 1.5, 0.5, nodes=11))
        assert list(frame.columns) == ["x", "a", "b", "c", "H", "gauss", "delta", "status"]
        assert (frame["status"] == "completed").all()
