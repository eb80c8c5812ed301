"""Truncated jet arithmetic, division and root lifting."""

import math

import numpy as np
import pytest

from metrise3d import expr as ex
from metrise3d.jets import (
    Jet,
    JetError,
    jet_div,
    jet_is_zero,
    jet_size,
    jet_sqrt,
    lift_root,
    monomials,
)


def random_jet(rng, order, invertible=False):
    c = rng.uniform(-1.0, 1.0, size=jet_size(order))
    if invertible:
        c[0] = rng.uniform(0.5, 1.5) * (1 if rng.random() < 0.5 else -1)
    return Jet(order, c)


def test_coefficient_counts():
    assert [jet_size(k) for k in range(5)] == [1, 4, 10, 20, 35]


def test_monomials_graded():
    monos = monomials(3)
    degrees = [sum(a) for a in monos]
    assert degrees == sorted(degrees)
    assert monos[0] == (0, 0, 0)
    assert monos[1:4] == ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def test_one_plus_x_times_one_minus_x():
    xhat = Jet.coordinate(0, 0.0, 2)
    prod = (1.0 + xhat) * (1.0 - xhat)
    pos = monomials(2).index((2, 0, 0))
    expected = np.zeros(jet_size(2))
    expected[0] = 1.0
    expected[pos] = -1.0
    assert np.allclose(prod.coeffs, expected)


def test_product_matches_expression_jet():
    p = (1.3, 0.7, -0.2)
    a = ex.jet_of(ex.parse("x*y"), p, 3)
    b = ex.jet_of(ex.parse("z"), p, 3)
    c = ex.jet_of(ex.parse("x*y*z"), p, 3)
    assert np.allclose((a * b).coeffs, c.coeffs, atol=1e-13)


def test_associativity_of_product():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b, c = (random_jet(rng, 3) for _ in range(3))
        lhs = (a * b) * c
        rhs = a * (b * c)
        assert np.allclose(lhs.coeffs, rhs.coeffs, atol=1e-13)


def test_order_mismatch_raises():
    with pytest.raises(JetError):
        Jet.constant(1.0, 2) + Jet.constant(1.0, 3)


def test_partial_of_expression_jet():
    p = (1.1, 0.4, 0.9)
    e = ex.parse("(x*y+z)^2/(1+x^2)")
    j4 = ex.jet_of(e, p, 4)
    for axis in range(3):
        d = ex.jet_of(ex.differentiate(e, axis), p, 3)
        assert np.allclose(j4.partial(axis).coeffs, d.coeffs,
                           rtol=1e-12, atol=1e-12)


class TestDivision:
    def test_self_division_is_one(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = random_jet(rng, 3, invertible=True)
            q = a / a
            expected = np.zeros(jet_size(3))
            expected[0] = 1.0
            assert np.allclose(q.coeffs, expected, atol=1e-13)

    def test_against_symbolic_reciprocal(self):
        p = (1.0, 1.0, 1.0)
        direct = ex.jet_of(ex.parse("1/(x*y+z)"), p, 2)
        divided = jet_div(Jet.constant(1.0, 2, p),
                          ex.jet_of(ex.parse("x*y+z"), p, 2))
        assert np.allclose(direct.coeffs, divided.coeffs, atol=1e-13)

    def test_geometric_series(self):
        xhat = Jet.coordinate(0, 0.0, 2)
        q = 1.0 / (1.0 + xhat)
        monos = monomials(2)
        expected = np.zeros(jet_size(2))
        expected[0] = 1.0
        expected[monos.index((1, 0, 0))] = -1.0
        expected[monos.index((2, 0, 0))] = 1.0
        assert np.allclose(q.coeffs, expected, atol=1e-14)

    def test_round_trip(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            a = random_jet(rng, 3)
            b = random_jet(rng, 3, invertible=True)
            back = (a / b) * b
            scale = max(np.max(np.abs(a.coeffs)), 1.0)
            assert np.allclose(back.coeffs, a.coeffs, atol=1e-12 * scale)

    def test_non_invertible_divisor(self):
        a = Jet.constant(1.0, 2)
        b = Jet.coordinate(0, 0.0, 2)
        with pytest.raises(JetError):
            a / b


class TestLiftRoot:
    def test_square_root_of_field(self):
        p = (1.0, 1.0, 1.0)
        g = ex.jet_of(ex.parse("x*y+z"), p, 3)
        coeffs = [-g, g.zeros_like(), Jet.constant(1.0, 3, p)]
        r = lift_root(coeffs, math.sqrt(2.0))
        oracle = ex.jet_of(ex.parse("sqrt(x*y+z)"), p, 3)
        assert np.allclose(r.coeffs, oracle.coeffs, rtol=1e-12, atol=1e-13)

    def test_constant_polynomial_root(self):
        coeffs = [Jet.constant(-6.0, 2), Jet.constant(1.0, 2)]
        r = lift_root(coeffs, 6.0)
        assert r.value == pytest.approx(6.0)
        assert np.allclose(r.coeffs[1:], 0.0)

    def test_double_root_rejected(self):
        coeffs = [Jet.constant(1.0, 2), Jet.constant(-2.0, 2),
                  Jet.constant(1.0, 2)]
        with pytest.raises(JetError):
            lift_root(coeffs, 1.0)

    def test_residual_invariant(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            c = [random_jet(rng, 3) for _ in range(3)]
            c[2] = c[2] + 1.0  # keep quadratic leading away from zero
            disc = c[1].value**2 - 4 * c[2].value * c[0].value
            if disc <= 0.05:
                continue
            r0 = (-c[1].value + math.sqrt(disc)) / (2 * c[2].value)
            r = lift_root(c, r0)
            resid = (c[2] * r * r + c[1] * r + c[0]).max_abs_coeff
            scale = max(cc.max_abs_coeff for cc in c)
            assert resid <= 1e-10 * max(scale, 1.0)


def test_sqrt_helper():
    p = (1.0, 2.0, 0.5)
    a = ex.jet_of(ex.parse("1+x^2+y*z"), p, 4)
    s = jet_sqrt(a)
    oracle = ex.jet_of(ex.parse("sqrt(1+x^2+y*z)"), p, 4)
    assert np.allclose(s.coeffs, oracle.coeffs, rtol=1e-12, atol=1e-13)
    with pytest.raises(JetError):
        jet_sqrt(Jet.constant(-1.0, 2))


def test_jet_reproduces_expression_tree_evaluation():
    # Jet arithmetic applied to subexpressions reproduces the jet of the
    # whole expression, for a few composite trees.
    p = (0.8, 1.2, 1.5)
    for order in range(5):
        f = ex.jet_of(ex.parse("x*y+z"), p, order)
        g = ex.jet_of(ex.parse("1+x^2"), p, order)
        h = ex.jet_of(ex.parse("(x*y+z)^2/(1+x^2) - z"), p, order)
        built = f * f / g - ex.jet_of(ex.parse("z"), p, order)
        scale = max(h.max_abs_coeff, 1.0)
        assert np.allclose(built.coeffs, h.coeffs, atol=1e-12 * scale)


def test_depth_four_random_trees_product_rule():
    # jet_of(e*f) == jet_of(e) * jet_of(f) for randomly generated ASTs.
    rng = np.random.default_rng(42)

    def gen(depth):
        if depth == 0 or rng.random() < 0.25:
            if rng.random() < 0.4:
                return ex.Const(round(rng.uniform(0.5, 2.5), 3))
            return (ex.X, ex.Y, ex.Z)[rng.integers(3)]
        k = rng.integers(4)
        if k == 0:
            return gen(depth - 1) + gen(depth - 1)
        if k == 1:
            return gen(depth - 1) * gen(depth - 1)
        if k == 2:
            return ex.Fun("exp", ex.Const(0.3) * gen(depth - 1))
        return ex.Fun("sin", gen(depth - 1))

    p = (0.6, 0.9, 1.1)
    for _ in range(40):
        e, f = gen(4), gen(4)
        je = ex.jet_of(e, p, 3)
        jf = ex.jet_of(f, p, 3)
        jef = ex.jet_of(e * f, p, 3)
        scale = max(jef.max_abs_coeff, 1.0)
        assert np.allclose((je * jf).coeffs, jef.coeffs, atol=1e-12 * scale)


def test_zero_test_is_scale_aware():
    j = Jet.constant(1e-12, 2)
    assert jet_is_zero(j, scale=1.0, tol=1e-9)
    assert not jet_is_zero(j, scale=1e-6, tol=1e-9)
