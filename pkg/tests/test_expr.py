"""Parser, symbolic differentiation, evaluation and jets of expressions."""

import math

import numpy as np
import pytest

from metrise3d import expr as ex
from metrise3d.expr import DomainError, ParseError


def ev(src, p):
    return ex.evaluate(ex.parse(src), p)


class TestParse:
    def test_shape_of_simple_sum(self):
        e = ex.parse("x*y + z")
        assert isinstance(e, ex.Add)
        assert isinstance(e.left, ex.Mul)
        assert isinstance(e.left.left, ex.Var) and e.left.left.index == 0
        assert isinstance(e.right, ex.Var) and e.right.index == 2

    def test_hand_evaluated_compound(self):
        assert ev("(x*y+z)*z^2", (1.0, 1.0, 1.0)) == pytest.approx(2.0)

    def test_double_star_is_an_error(self):
        with pytest.raises(ParseError):
            ex.parse("x**2")

    def test_error_carries_offset_and_expected(self):
        with pytest.raises(ParseError) as info:
            ex.parse("x + *y")
        assert info.value.offset == 4
        assert info.value.expected

    def test_unknown_identifier(self):
        with pytest.raises(ParseError) as info:
            ex.parse("x + w")
        assert "w" in str(info.value)

    def test_precedence_and_associativity(self):
        assert ev("2+3*4", (0, 0, 0)) == 14.0
        assert ev("2-3-4", (0, 0, 0)) == -5.0
        assert ev("12/3/2", (0, 0, 0)) == 2.0
        assert ev("-x^2", (3.0, 0, 0)) == -9.0
        assert ev("2*x^-1", (4.0, 0, 0)) == 0.5

    def test_functions(self):
        assert ev("sin(x)", (0.3, 0, 0)) == pytest.approx(math.sin(0.3))
        assert ev("sqrt(x*y+z)", (1, 1, 1)) == pytest.approx(math.sqrt(2))

    def test_chained_power_is_not_grammar(self):
        with pytest.raises(ParseError):
            ex.parse("x^2^3")

    def test_scientific_literal(self):
        assert ev("1.5e2 + x", (1, 0, 0)) == 151.0


class TestDifferentiate:
    def test_product_rule_lines(self):
        e = ex.parse("x*y+z")
        d = ex.differentiate(e, "x")
        for p in [(0.3, 1.7, -2.0), (1, 1, 1)]:
            assert ex.evaluate(d, p) == pytest.approx(p[1])

    def test_second_derivative_by_hand(self):
        e = ex.parse("(x*y+z)^2")
        d = ex.differentiate(e, "z")
        assert ex.evaluate(d, (1, 1, 1)) == pytest.approx(4.0)

    def test_constant_in_other_variable(self):
        d = ex.differentiate(ex.parse("sin(x)"), "y")
        for p in [(0.2, 3.0, 1.0), (1.5, -1.0, 0.0)]:
            assert ex.evaluate(d, p) == 0.0

    def test_quotient_and_chain(self):
        e = ex.parse("sin(x^2)/cos(y)")
        d = ex.differentiate(e, "x")
        x, y = 0.7, 0.3
        expected = 2 * x * math.cos(x**2) / math.cos(y)
        assert ex.evaluate(d, (x, y, 0)) == pytest.approx(expected)

    def test_mixed_partials_commute_at_random_points(self):
        rng = np.random.default_rng(7)
        sources = ["(x*y+z)^3/(1+x^2)", "sin(x*y)*exp(z)", "sqrt(1+x^2+y^2)",
                   "log(1+x^2)*z - y/x"]
        for src in sources:
            e = ex.parse(src)
            for u in range(3):
                for v in range(3):
                    duv = ex.differentiate(ex.differentiate(e, u), v)
                    dvu = ex.differentiate(ex.differentiate(e, v), u)
                    for _ in range(12):
                        p = 0.5 + rng.random(3)
                        a = ex.evaluate(duv, p)
                        b = ex.evaluate(dvu, p)
                        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


class TestEvaluate:
    def test_paper_volume_scale_at_unit_point(self):
        assert ev("(1+x^2)^4*(x*y+z)*z", (1, 1, 1)) == pytest.approx(32.0)

    def test_origin(self):
        assert ev("x", (0, 0, 0)) == 0.0

    def test_division_by_zero_is_domain_error(self):
        with pytest.raises(DomainError) as info:
            ev("1/z", (1, 1, 0))
        assert "1/z" in str(info.value)

    def test_log_and_sqrt_domain_errors(self):
        with pytest.raises(DomainError):
            ev("log(x)", (-1, 0, 0))
        with pytest.raises(DomainError):
            ev("sqrt(x)", (-1, 0, 0))

    def test_negative_power_at_zero(self):
        with pytest.raises(DomainError):
            ev("x^-2", (0, 1, 1))


class TestPrinter:
    @pytest.mark.parametrize("src", [
        "x*y + z", "(x*y+z)*z^2", "-x^2 + y", "1/((x*y+z)*z)",
        "sin(x)*cos(y)/exp(z)", "2*x/(1+x^2)", "x^-3 - y^2",
        "sqrt(x^2+1) - log(y+2)", "-(x+y)*z",
    ])
    def test_round_trip_evaluates_equal(self, src):
        rng = np.random.default_rng(11)
        e = ex.parse(src)
        printed = ex.to_source(e)
        e2 = ex.parse(printed)
        for _ in range(20):
            p = 0.5 + rng.random(3)
            assert ex.evaluate(e2, p) == pytest.approx(
                ex.evaluate(e, p), rel=1e-13)


class TestJetOf:
    def test_linear_jet(self):
        j = ex.jet_of(ex.parse("x*y"), (1, 1, 1), 1)
        assert j.value == pytest.approx(1.0)
        assert np.allclose(j.gradient, [1.0, 1.0, 0.0])

    def test_quadratic_coefficient_includes_factorial(self):
        j = ex.jet_of(ex.parse("z^2"), (1, 1, 1), 2)
        from metrise3d.jets import monomials
        pos = monomials(2).index((0, 0, 2))
        assert j.coeffs[pos] == pytest.approx(1.0)

    def test_against_central_finite_differences(self):
        e = ex.parse("(x*y+z)*z")
        p = np.array([1.0, 1.0, 1.0])
        j = ex.jet_of(e, tuple(p), 2)
        h = 1e-4
        for axis in range(3):
            dp = np.zeros(3)
            dp[axis] = h
            fd = (ex.evaluate(e, p + dp) - ex.evaluate(e, p - dp)) / (2 * h)
            assert j.gradient[axis] == pytest.approx(fd, rel=1e-6)
        # second partial in z by central differences
        dp = np.array([0.0, 0.0, h])
        fd2 = (ex.evaluate(e, p + dp) - 2 * ex.evaluate(e, p)
               + ex.evaluate(e, p - dp)) / h**2
        from metrise3d.jets import monomials
        pos = monomials(2).index((0, 0, 2))
        assert 2 * j.coeffs[pos] == pytest.approx(fd2, rel=1e-5)

    def test_domain_error_propagates(self):
        with pytest.raises(DomainError):
            ex.jet_of(ex.parse("1/z"), (1, 1, 0), 2)
