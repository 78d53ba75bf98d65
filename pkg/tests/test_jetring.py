"""
Tests for the jet-space differential algebra
"""

from fractions import Fraction

import pytest

from pss_lab.errors import JetOrderError, MissingRuleError, ParameterError, UnboundSymbolError
from pss_lab.services.jetring import (
    const,
    dt,
    dx,
    eta,
    eta_inv,
    evaluate,
    exp_x,
    is_param_scalar,
    jet_name,
    jet_ring,
    normalize,
    partial,
    pde_residual,
    pde_rhs,
    phi,
    pseudo_potential,
    reduce,
    render,
    substitute,
    symbol,
    total_derivative,
    u,
)

mu, s = symbol("mu"), symbol("s")


def sample_exprs():
    u0, u1, u2 = u(0), u(1), u(2)
    return [
        u0 ** 2 * u1 + 3 * u2,
        exp_x() * u1 ** 2 - mu * u0,
        (u1 - u0 - 1) ** (-2) * exp_x(),
        s * u0 * u2 + Fraction(1, 3) * u1 ** 3,
    ]


class TestParameterRing:

    def test_defining_relation_vanishes(self):
        assert (s ** 2 - mu ** 2 - 1).is_zero

    def test_eta_times_inverse_is_one(self):
        assert (mu + s) * (s - mu) == const(1)
        for branch in (1, -1):
            assert eta(branch) * eta_inv(branch) == const(1)

    def test_square_is_reduced(self):
        assert (s + mu) ** 2 == 2 * mu * s + 2 * mu ** 2 + 1

    def test_s_degree_at_most_one(self):
        e = (s + mu) ** 5 * u(0)
        s_index = jet_ring.index_of["s"]
        assert max(monom[s_index] for monom in e.num.itermonoms()) <= 1

    def test_param_scalar(self):
        assert is_param_scalar(mu * s + 1)
        assert not is_param_scalar(mu * u(0))

    def test_bad_branch(self):
        with pytest.raises(ParameterError):
            eta(0)


class TestNormalize:

    def test_equal_expressions_normalize_identically(self):
        a = (u(1) ** 2 - u(0) ** 2) / (u(1) - u(0))
        b = u(1) + u(0)
        assert normalize(a) == normalize(b)
        assert normalize(a).is_polynomial

    def test_constant_in_denominator_is_absorbed(self):
        e = u(0) / (2 * u(1))
        assert normalize(e) == Fraction(1, 2) * u(0) / u(1)

    def test_zero_denominator(self):
        with pytest.raises(ZeroDivisionError):
            u(0) / (s ** 2 - mu ** 2 - 1)

    def test_zero_is_unique(self):
        assert (u(0) / u(1) - u(0) / u(1)).is_zero


class TestTotalDerivative:

    def test_x_derivative_of_u(self):
        assert total_derivative(u(0), "x") == u(1)

    def test_t_derivative_is_linear(self):
        assert total_derivative(u(0) - u(2), "t") == u(0, 1) - u(2, 1)

    def test_product_rule_with_exponential(self):
        e = exp_x() * u(1) ** 2
        expected = exp_x() * u(1) ** 2 + 2 * exp_x() * u(1) * u(2)
        assert dx(e) == expected

    def test_exponential_is_constant_in_t(self):
        assert dt(exp_x()).is_zero

    def test_second_t_derivative_rejected(self):
        with pytest.raises(JetOrderError):
            dt(u(0, 1))

    def test_g_needs_rule(self):
        with pytest.raises(MissingRuleError):
            dx(pseudo_potential() * u(0))

    def test_unknown_direction(self):
        with pytest.raises(ParameterError):
            total_derivative(u(0), "y")

    @pytest.mark.parametrize("index", range(4))
    def test_mixed_partials_commute(self, index):
        e = sample_exprs()[index]
        assert dt(dx(e)) == dx(dt(e))

    def test_leibniz(self):
        exprs = sample_exprs()
        for a, b in zip(exprs, exprs[1:]):
            for direction in ("x", "t"):
                lhs = total_derivative(a * b, direction)
                rhs = a * total_derivative(b, direction) + b * total_derivative(a, direction)
                assert lhs == rhs

    def test_quotient_rule(self):
        w = u(1) - u(0) - 1
        assert dx(1 / w) == -(u(2) - u(1)) / w ** 2


class TestReduce:

    def test_pde_rule(self):
        assert reduce(u(2, 1), "pde") == u(0, 1) - pde_rhs()

    def test_pde_leaves_u_t(self):
        assert reduce(u(0, 1), "pde") == u(0, 1)

    def test_flow_prolongation(self):
        assert reduce(u(2, 1), "flow") == u(0, 1) - phi() - dx(phi())

    def test_pde_residual_reduces_to_zero(self):
        assert reduce(pde_residual(), "pde").is_zero
        assert reduce(pde_residual(), "flow").is_zero

    @pytest.mark.parametrize("ruleset", ["pde", "flow"])
    def test_idempotent(self, ruleset):
        e = u(3, 1) * u(0) + u(2, 1) ** 2 - exp_x() * u(1, 1)
        once = reduce(e, ruleset)
        assert reduce(once, ruleset) == once

    def test_commutes_with_dx_on_t_free(self):
        e = u(0) ** 3 * u(2)
        assert reduce(dx(e), "pde") == dx(reduce(e, "pde"))

    def test_unknown_ruleset(self):
        with pytest.raises(ParameterError):
            reduce(u(0), "heat")


class TestSubstituteAndPartial:

    def test_partial(self):
        e = u(0) ** 2 * u(1) + u(1) ** 3
        assert partial(e, "u_x") == u(0) ** 2 + 3 * u(1) ** 2

    def test_shift(self):
        g = pseudo_potential()
        assert substitute(g ** 2, {"g": g + 1}) == g ** 2 + 2 * g + 1

    def test_rational_replacement_rejected(self):
        with pytest.raises(ParameterError):
            substitute(u(0), {"u": 1 / u(1)})

    def test_substitute_into_denominator(self):
        e = 1 / (u(0) + 1)
        assert substitute(e, {"u": u(1)}) == 1 / (u(1) + 1)


class TestEvaluateAndRender:

    def test_exact_value(self):
        e = u(0) ** 2 * u(2) / (u(1) - u(0) - 1)
        assert evaluate(e, {"u": 1, "u_x": 3, "u_xx": Fraction(1, 2)}) == Fraction(1, 2)

    def test_s_follows_mu(self):
        assert evaluate(s, {"mu": Fraction(3, 4)}) == Fraction(5, 4)

    def test_float_point(self):
        assert evaluate(exp_x() * 2, {"E": 1.5}) == pytest.approx(3.0)

    def test_unbound_symbol(self):
        with pytest.raises(UnboundSymbolError):
            evaluate(u(0) * u(1), {"u": 1})

    def test_zero_denominator_at_point(self):
        with pytest.raises(ZeroDivisionError):
            evaluate(1 / u(1), {"u_x": 0})

    def test_render(self):
        assert render(u(2)) == "u_xx"
        assert render(const(0)) == "0"
        assert "E" in render(exp_x() ** 2)

    def test_jet_names(self):
        assert jet_name(0, 0) == "u"
        assert jet_name(2, 1) == "u_xxt"

    def test_out_of_range_jet(self):
        with pytest.raises(JetOrderError):
            u(jet_ring.max_order + 1)
