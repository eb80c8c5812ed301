"""Truncated Taylor-jet arithmetic in three variables.

A jet of order K at a base point stores the coefficients of a degree-K
Taylor polynomial, indexed by the multi-indices |alpha| <= K in graded
lexicographic order.  Arithmetic is exact truncated polynomial arithmetic;
division and polynomial-root lifting run Newton's iteration in the jet
ring itself.
"""

from __future__ import annotations

import functools
import math

import numpy as np

MAX_ORDER = 4


class JetError(ArithmeticError):
    pass


@functools.lru_cache(maxsize=None)
def monomials(order):
    """Multi-indices with |alpha| <= order, graded-lex (x > y > z)."""
    if not 0 <= order <= MAX_ORDER:
        raise JetError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
    out = []
    for deg in range(order + 1):
        for i in range(deg, -1, -1):
            for j in range(deg - i, -1, -1):
                out.append((i, j, deg - i - j))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def _position(order):
    return {alpha: k for k, alpha in enumerate(monomials(order))}


@functools.lru_cache(maxsize=None)
def _mul_table(order):
    """Index triples (i, j, k) with mono[i] + mono[j] = mono[k]."""
    monos = monomials(order)
    pos = _position(order)
    I, J, K = [], [], []
    for i, a in enumerate(monos):
        for j, b in enumerate(monos):
            s = (a[0] + b[0], a[1] + b[1], a[2] + b[2])
            if sum(s) <= order:
                I.append(i)
                J.append(j)
                K.append(pos[s])
    return np.array(I), np.array(J), np.array(K)


@functools.lru_cache(maxsize=None)
def _partial_table(order, axis):
    """(src, factor): coefficient arrays mapping a jet to its derivative.

    The derivative jet has order-1; its coefficient at beta equals
    (beta[axis] + 1) * coeff(beta + e_axis).
    """
    pos = _position(order)
    src, fac = [], []
    for beta in monomials(order - 1):
        up = list(beta)
        up[axis] += 1
        src.append(pos[tuple(up)])
        fac.append(float(beta[axis] + 1))
    return np.array(src), np.array(fac)


@functools.lru_cache(maxsize=None)
def jet_size(order):
    return len(monomials(order))


class Jet:
    """Truncated Taylor expansion at a base point.

    The base point is carried for diagnostics only; arithmetic never mixes
    jets of different order.
    """

    __slots__ = ("order", "coeffs", "point")

    def __init__(self, order, coeffs, point=None):
        self.order = order
        self.coeffs = coeffs  # float64 ndarray, len == jet_size(order)
        self.point = point

    @classmethod
    def from_coefficients(cls, order, coeffs, point=None):
        arr = np.asarray(coeffs, dtype=float)
        if arr.shape != (jet_size(order),):
            raise JetError(
                f"order-{order} jet needs {jet_size(order)} coefficients, "
                f"got {arr.shape}")
        return cls(order, arr, point)

    @classmethod
    def constant(cls, value, order, point=None):
        c = np.zeros(jet_size(order))
        c[0] = float(value)
        return cls(order, c, point)

    @classmethod
    def coordinate(cls, axis, value, order, point=None):
        """Jet of the coordinate function x^axis centred at value."""
        c = np.zeros(jet_size(order))
        c[0] = float(value)
        if order >= 1:
            c[1 + axis] = 1.0
        return cls(order, c, point)

    @property
    def value(self):
        return float(self.coeffs[0])

    @property
    def gradient(self):
        if self.order < 1:
            raise JetError("order-0 jet has no gradient")
        return np.array(self.coeffs[1:4])

    @property
    def max_abs_coeff(self):
        return float(np.max(np.abs(self.coeffs)))

    def truncated(self, order):
        if order > self.order:
            raise JetError(f"cannot extend order {self.order} to {order}")
        return Jet(order, self.coeffs[: jet_size(order)].copy(), self.point)

    def partial(self, axis):
        """Jet of the partial derivative along axis; order drops by one."""
        if self.order < 1:
            raise JetError("cannot differentiate an order-0 jet")
        src, fac = _partial_table(self.order, axis)
        return Jet(self.order - 1, self.coeffs[src] * fac, self.point)

    def zeros_like(self):
        return Jet(self.order, np.zeros_like(self.coeffs), self.point)

    def _check(self, other):
        if self.order != other.order:
            raise JetError(
                f"jet order mismatch: {self.order} vs {other.order}")

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.order, self.coeffs + other.coeffs, self.point)
        c = self.coeffs.copy()
        c[0] += float(other)
        return Jet(self.order, c, self.point)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.order, self.coeffs - other.coeffs, self.point)
        c = self.coeffs.copy()
        c[0] -= float(other)
        return Jet(self.order, c, self.point)

    def __rsub__(self, other):
        c = -self.coeffs
        c[0] += float(other)
        return Jet(self.order, c, self.point)

    def __neg__(self):
        return Jet(self.order, -self.coeffs, self.point)

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            I, J, K = _mul_table(self.order)
            out = np.bincount(K, weights=self.coeffs[I] * other.coeffs[J],
                              minlength=jet_size(self.order))
            return Jet(self.order, out, self.point)
        return Jet(self.order, self.coeffs * float(other), self.point)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return jet_div(self, other)
        return Jet(self.order, self.coeffs / float(other), self.point)

    def __rtruediv__(self, other):
        return jet_div(Jet.constant(other, self.order, self.point), self)

    def __pow__(self, n):
        n = int(n)
        if n < 0:
            return 1.0 / self**(-n)
        out = Jet.constant(1.0, self.order, self.point)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out

    def __repr__(self):
        return f"Jet(order={self.order}, value={self.value:.6g})"


def jet_add(a, b):
    return a + b


def jet_sub(a, b):
    return a - b


def jet_mul(a, b):
    return a * b


def jet_scale(a, c):
    return a * float(c)


def jet_div(a, b):
    """Quotient c with c*b == a at truncation order.

    Newton iteration for 1/b on the nilpotent part; quadratic convergence
    makes ceil(log2(K+1)) + 1 sweeps exact.
    """
    if not isinstance(b, Jet):
        return a * (1.0 / float(b))
    if b.value == 0.0:
        raise JetError("division by a non-invertible jet (zero value part)")
    inv = Jet.constant(1.0 / b.value, b.order, b.point)
    for _ in range(_newton_sweeps(b.order)):
        inv = inv * (2.0 - b * inv)
    if isinstance(a, Jet):
        return a * inv
    return float(a) * inv


def _newton_sweeps(order):
    return max(1, math.ceil(math.log2(order + 1))) + 1


def _poly_eval(coeffs, t):
    """Horner evaluation of a polynomial with jet coefficients at jet t."""
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * t + c
    return acc


def lift_root(coeffs, r0, tol=1e-9):
    """Lift a simple root of the value-part polynomial to a jet root.

    `coeffs` are jet coefficients c0..cd of p(t) = sum c_k t^k; `r0` must
    satisfy p0(r0) ~ 0 with p0'(r0) away from zero at value level.  Returns
    the jet r with p(r) = 0 in jet arithmetic.
    """
    if len(coeffs) < 2:
        raise JetError("need a polynomial of degree >= 1")
    order = coeffs[0].order
    point = coeffs[0].point
    vals = np.array([c.value for c in coeffs])
    scale = float(np.sum(np.abs(vals) * np.abs(r0) ** np.arange(len(vals))))
    scale = max(scale, float(np.max(np.abs(vals))), 1e-300)
    p0 = np.polynomial.polynomial.polyval(r0, vals)
    dp0 = np.polynomial.polynomial.polyval(
        r0, vals[1:] * np.arange(1, len(vals)))
    if abs(dp0) <= tol * scale:
        raise JetError(
            f"root {r0!r} is not simple at value level (|p'| = {abs(dp0):.3g} "
            f"<= {tol:.1g} * scale {scale:.3g})")
    if abs(p0) > max(math.sqrt(tol), 1e-6) * scale:
        raise JetError(f"{r0!r} is not a root of the value polynomial "
                       f"(|p| = {abs(p0):.3g} vs scale {scale:.3g})")
    dcoeffs = [float(k) * coeffs[k] for k in range(1, len(coeffs))]
    r = Jet.constant(r0, order, point)
    for _ in range(_newton_sweeps(order) + 2):
        r = r - _poly_eval(coeffs, r) / _poly_eval(dcoeffs, r)
    return r


def jet_sqrt(a):
    """Square root via lift_root on t^2 - a; value part must be positive."""
    if a.value <= 0.0:
        raise JetError("jet sqrt needs a positive value part")
    coeffs = [-a, a.zeros_like(), Jet.constant(1.0, a.order, a.point)]
    return lift_root(coeffs, math.sqrt(a.value))


def value_part(s):
    """Value of a scalar that may be a Jet or a plain number."""
    return s.value if isinstance(s, Jet) else float(s)


def jet_is_zero(j, scale, tol=1e-9):
    """Scale-aware zero test: every coefficient below tol * scale."""
    m = j.max_abs_coeff if isinstance(j, Jet) else abs(float(j))
    return m <= tol * max(scale, 1e-300)
