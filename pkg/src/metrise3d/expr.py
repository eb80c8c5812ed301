"""Closed-form expressions in the coordinates (x, y, z).

Small expression language used to enter connection components: decimal
literals, the three coordinates, + - * /, integer powers via ^, unary minus,
and the functions sin, cos, exp, log, sqrt.  Expressions are immutable ASTs;
differentiation is exact and symbolic, evaluation is double precision.

Grammar (EBNF):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := ('-')? power
    power  := atom ('^' integer)?
    atom   := number | 'x'|'y'|'z' | func '(' expr ')' | '(' expr ')'
    func   := 'sin'|'cos'|'exp'|'log'|'sqrt'
"""

from __future__ import annotations

import math

from .jets import Jet

VARIABLES = ("x", "y", "z")
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ParseError(ValueError):
    """Syntax or lexical error, with byte offset and expected-token set."""

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f"{message} at offset {offset}"
        if expected:
            detail += " (expected: " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(detail)


class DomainError(ArithmeticError):
    """Evaluation hit a singularity; carries the offending subexpression."""

    def __init__(self, message, subexpression):
        self.subexpression = subexpression
        super().__init__(f"{message} in subexpression '{to_source(subexpression)}'")


class Expr:
    """Base AST node.  Nodes are immutable after construction."""

    __slots__ = ("_dmemo", "_fn")

    def __init__(self):
        self._dmemo = None  # per-variable derivative cache
        self._fn = None  # compiled evaluator cache

    # Operator overloads build new trees through the folding constructors,
    # which is what the connection-normalisation code relies on.
    def __add__(self, other):
        return _add(self, _coerce(other))

    def __radd__(self, other):
        return _add(_coerce(other), self)

    def __sub__(self, other):
        return _sub(self, _coerce(other))

    def __rsub__(self, other):
        return _sub(_coerce(other), self)

    def __mul__(self, other):
        return _mul(self, _coerce(other))

    def __rmul__(self, other):
        return _mul(_coerce(other), self)

    def __truediv__(self, other):
        return _div(self, _coerce(other))

    def __rtruediv__(self, other):
        return _div(_coerce(other), self)

    def __neg__(self):
        return _neg(self)

    def __pow__(self, n):
        return _pow(self, n)

    def __repr__(self):
        return f"{type(self).__name__}({to_source(self)!r})"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        self.value = float(value)


class Var(Expr):
    __slots__ = ("index",)

    def __init__(self, index):
        super().__init__()
        self.index = index  # 0, 1, 2 for x, y, z


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg):
        super().__init__()
        self.arg = arg


class _Binary(Expr):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        super().__init__()
        self.left = left
        self.right = right


class Add(_Binary):
    __slots__ = ()


class Sub(_Binary):
    __slots__ = ()


class Mul(_Binary):
    __slots__ = ()


class Div(_Binary):
    __slots__ = ()


class Pow(Expr):
    """Integer power; the exponent is a literal int, possibly negative."""

    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        super().__init__()
        self.base = base
        self.exponent = int(exponent)


class Fun(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name, arg):
        super().__init__()
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        self.name = name
        self.arg = arg


X, Y, Z = Var(0), Var(1), Var(2)
ZERO = Const(0.0)
ONE = Const(1.0)


def _coerce(v):
    if isinstance(v, Expr):
        return v
    return Const(v)


def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


# Folding constructors.  Only trivial identities involving literal 0/1 are
# folded; there is no simplification pass.  Keeps derivative trees small.

def _add(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def _sub(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    return Sub(a, b)


def _neg(a):
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return _neg(b)
    if _is_const(b, -1.0):
        return _neg(a)
    return Mul(a, b)


def _div(a, b):
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def _pow(a, n):
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return a
    if _is_const(a):
        return Const(a.value**n)
    return Pow(a, n)


# ---------------------------------------------------------------------------
# Parser

_TOKEN_NAMES = {
    "+": "'+'", "-": "'-'", "*": "'*'", "/": "'/'", "^": "'^'",
    "(": "'('", ")": "')'",
}


def _tokenize(source):
    """Yield (kind, value, offset) triples; kind in
    {num, var, func, op, end}."""
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in "+-*/^()":
            tokens.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    while k < n and source[k].isdigit():
                        k += 1
                    j = k
            text = source[i:j]
            try:
                value = float(text)
            except ValueError:
                raise ParseError(f"malformed number {text!r}", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            name = source[i:j]
            if name in VARIABLES:
                tokens.append(("var", name, i))
            elif name in FUNCTIONS:
                tokens.append(("func", name, i))
            else:
                raise ParseError(f"unknown identifier {name!r}", i,
                                 expected=VARIABLES + FUNCTIONS)
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected):
        kind, value, offset = self.peek()
        shown = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"unexpected {shown}", offset, expected=expected)

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail({"'+'", "'-'", "'*'", "'/'", "end of input"})
        return e

    def expr(self):
        e = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.advance()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.factor()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.advance()[1]
            rhs = self.factor()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def factor(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Neg(self.power())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            return Pow(base, self.integer())
        return base

    def integer(self):
        sign = 1
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            sign = -1
        kind, value, offset = self.peek()
        if kind != "num" or value != int(value):
            self.fail({"integer exponent"})
        self.advance()
        return sign * int(value)

    def atom(self):
        kind, value, offset = self.peek()
        if kind == "num":
            self.advance()
            return Const(value)
        if kind == "var":
            self.advance()
            return Var(VARIABLES.index(value))
        if kind == "func":
            self.advance()
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Fun(value, arg)
        if (kind, value) == ("op", "("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        self.fail({"number", "'x'", "'y'", "'z'", "function", "'('"})

    def expect(self, op):
        if self.peek()[:2] != ("op", op):
            self.fail({_TOKEN_NAMES[op]})
        self.advance()


def parse(source):
    """Parse a text expression into an :class:`Expr`."""
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def to_source(e):
    """Canonical grammar form of the AST; reparses to an equal tree."""
    return _print(e, 0)


def _print(e, parent_prec):
    if isinstance(e, Const):
        v = e.value
        if v < 0:
            s = repr(-v) if -v != int(-v) else str(int(-v))
            s = "-" + s
            return f"({s})" if parent_prec > 0 else s
        return repr(v) if v != int(v) else str(int(v))
    if isinstance(e, Var):
        return VARIABLES[e.index]
    if isinstance(e, Fun):
        return f"{e.name}({_print(e.arg, 0)})"
    prec = _PREC[type(e)]
    if isinstance(e, Neg):
        s = "-" + _print(e.arg, prec)
    elif isinstance(e, Pow):
        s = _print(e.base, prec + 1) + "^" + (
            str(e.exponent) if e.exponent >= 0 else f"({e.exponent})")
        # '(n)' is not grammar for exponents; print negative powers as 1/...
        if e.exponent < 0:
            s = f"1/{_print(e.base, _PREC[Div] + 1)}^{-e.exponent}"
    else:
        sym = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
        # left associative: right child needs parens at equal precedence
        s = _print(e.left, prec) + sym + _print(e.right, prec + 1)
    return f"({s})" if prec < parent_prec else s


def _pysource(e):
    """Fully parenthesised Python source, for the compiled fast path."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return VARIABLES[e.index]
    if isinstance(e, Neg):
        return f"(-{_pysource(e.arg)})"
    if isinstance(e, Add):
        return f"({_pysource(e.left)}+{_pysource(e.right)})"
    if isinstance(e, Sub):
        return f"({_pysource(e.left)}-{_pysource(e.right)})"
    if isinstance(e, Mul):
        return f"({_pysource(e.left)}*{_pysource(e.right)})"
    if isinstance(e, Div):
        return f"({_pysource(e.left)}/{_pysource(e.right)})"
    if isinstance(e, Pow):
        return f"({_pysource(e.base)}**({e.exponent}))"
    if isinstance(e, Fun):
        return f"{e.name}({_pysource(e.arg)})"
    raise TypeError(f"not an Expr: {e!r}")


_COMPILE_ENV = {
    "sin": math.sin, "cos": math.cos, "exp": math.exp,
    "log": math.log, "sqrt": math.sqrt, "__builtins__": {},
}


def _compiled(e):
    fn = e._fn
    if fn is None:
        fn = eval(f"lambda x,y,z: ({_pysource(e)})", dict(_COMPILE_ENV))
        e._fn = fn
    return fn


# ---------------------------------------------------------------------------
# Evaluation

def evaluate(e, point):
    """Evaluate at a point in R^3.  Raises DomainError at singularities,
    identifying the offending subexpression."""
    x, y, z = point
    try:
        return _compiled(e)(float(x), float(y), float(z))
    except (ZeroDivisionError, ValueError, OverflowError):
        # Re-run the careful evaluator to locate the failing node.
        return _eval_careful(e, (float(x), float(y), float(z)))


def _eval_careful(e, p):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return p[e.index]
    if isinstance(e, Neg):
        return -_eval_careful(e.arg, p)
    if isinstance(e, Add):
        return _eval_careful(e.left, p) + _eval_careful(e.right, p)
    if isinstance(e, Sub):
        return _eval_careful(e.left, p) - _eval_careful(e.right, p)
    if isinstance(e, Mul):
        return _eval_careful(e.left, p) * _eval_careful(e.right, p)
    if isinstance(e, Div):
        num = _eval_careful(e.left, p)
        den = _eval_careful(e.right, p)
        if den == 0.0:
            raise DomainError("division by zero", e)
        return num / den
    if isinstance(e, Pow):
        base = _eval_careful(e.base, p)
        if base == 0.0 and e.exponent < 0:
            raise DomainError("zero raised to a negative power", e)
        try:
            return base**e.exponent
        except OverflowError:
            raise DomainError("overflow in power", e) from None
    if isinstance(e, Fun):
        v = _eval_careful(e.arg, p)
        if e.name == "log":
            if v <= 0.0:
                raise DomainError("log of a non-positive value", e)
            return math.log(v)
        if e.name == "sqrt":
            if v < 0.0:
                raise DomainError("sqrt of a negative value", e)
            return math.sqrt(v)
        try:
            return getattr(math, e.name)(v)
        except (ValueError, OverflowError):
            raise DomainError(f"{e.name} out of domain", e) from None
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Differentiation

def differentiate(e, var):
    """Exact partial derivative with respect to var ('x'|'y'|'z' or 0..2).

    Derivatives are memoised on the AST nodes, so repeated jets of the
    same expression at many points share one derivative tree.
    """
    idx = VARIABLES.index(var) if isinstance(var, str) else int(var)
    memo = e._dmemo
    if memo is None:
        memo = e._dmemo = {}
    d = memo.get(idx)
    if d is None:
        d = memo[idx] = _derive(e, idx)
    return d


def _derive(e, i):
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == i else ZERO
    if isinstance(e, Neg):
        return _neg(differentiate(e.arg, i))
    if isinstance(e, Add):
        return _add(differentiate(e.left, i), differentiate(e.right, i))
    if isinstance(e, Sub):
        return _sub(differentiate(e.left, i), differentiate(e.right, i))
    if isinstance(e, Mul):
        return _add(_mul(differentiate(e.left, i), e.right),
                    _mul(e.left, differentiate(e.right, i)))
    if isinstance(e, Div):
        du = differentiate(e.left, i)
        dv = differentiate(e.right, i)
        return _div(_sub(_mul(du, e.right), _mul(e.left, dv)),
                    _pow(e.right, 2))
    if isinstance(e, Pow):
        du = differentiate(e.base, i)
        return _mul(_mul(Const(e.exponent), _pow(e.base, e.exponent - 1)), du)
    if isinstance(e, Fun):
        du = differentiate(e.arg, i)
        u = e.arg
        if e.name == "sin":
            return _mul(Fun("cos", u), du)
        if e.name == "cos":
            return _neg(_mul(Fun("sin", u), du))
        if e.name == "exp":
            return _mul(e, du)
        if e.name == "log":
            return _div(du, u)
        if e.name == "sqrt":
            return _div(du, _mul(Const(2.0), e))
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Jets

def jet_of(e, point, order):
    """Degree-`order` Taylor jet of the expression at `point`.

    Coefficients come from evaluating exact symbolic partials: the
    coefficient of the multi-index alpha is d^alpha e(point) / alpha!.
    """
    from .jets import monomials

    monos = monomials(order)
    # Walk the graded list; each multi-index is one partial derivative step
    # beyond an earlier one, so the memoised trees are built incrementally.
    partials = {(0, 0, 0): e}
    coeffs = []
    for alpha in monos:
        d = partials.get(alpha)
        if d is None:
            for axis in range(3):
                if alpha[axis] > 0:
                    prev = list(alpha)
                    prev[axis] -= 1
                    d = differentiate(partials[tuple(prev)], axis)
                    break
            partials[alpha] = d
        fact = (math.factorial(alpha[0]) * math.factorial(alpha[1])
                * math.factorial(alpha[2]))
        coeffs.append(evaluate(d, point) / fact)
    return Jet.from_coefficients(order, coeffs, point=tuple(point))
