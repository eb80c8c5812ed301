"""Fixed-size tensor algebra on R^3 over a generic scalar (float or Jet).

Covariant/contravariant flavor is tracked by distinct wrapper classes so
that index-position mistakes fail loudly instead of silently contracting
the wrong slots.  All determinant and inverse formulas are closed-form
polynomial (adjugate based), hence exact on jets and branch-free.

Determinant conventions: `det_matrix` is the ordinary 3x3 determinant;
`det_eps(s, eps)` is the epsilon-contraction
``s^{ab} s^{cd} s^{ef} eps_{ace} eps_{bdf}`` which equals
``6 * eps123^2 * det_matrix(s)`` (and ``6 * det_matrix`` when eps123 = 1).
Both are exposed; the metric construction uses the epsilon form.
"""

from __future__ import annotations

import numpy as np

from .jets import Jet, value_part

# (i, j, k, sign) for the six nonzero entries of the permutation symbol
PERMUTATIONS = (
    (0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0),
    (0, 2, 1, -1.0), (2, 1, 0, -1.0), (1, 0, 2, -1.0),
)


class TensorError(ValueError):
    pass


def _sym_matrix(entries):
    m = np.empty((3, 3), dtype=object)
    for i in range(3):
        for j in range(3):
            m[i, j] = entries[i][j]
    return m


class _Sym2:
    """Symmetric 2-tensor; six independent components, stored as a full
    3x3 object array for convenient indexing."""

    __slots__ = ("m",)

    def __init__(self, entries, symmetrize=False):
        m = entries if isinstance(entries, np.ndarray) else _sym_matrix(entries)
        if symmetrize:
            sym = np.empty((3, 3), dtype=object)
            for i in range(3):
                for j in range(3):
                    sym[i, j] = (m[i, j] + m[j, i]) * 0.5
            m = sym
        self.m = m

    @classmethod
    def diag(cls, a, b, c):
        zero = 0.0
        return cls([[a, zero, zero], [zero, b, zero], [zero, zero, c]])

    def __getitem__(self, idx):
        return self.m[idx]

    def values(self):
        """Value parts as a float matrix."""
        return np.array([[value_part(self.m[i, j]) for j in range(3)]
                         for i in range(3)])

    def map(self, f):
        out = np.empty((3, 3), dtype=object)
        for i in range(3):
            for j in range(3):
                out[i, j] = f(self.m[i, j])
        return type(self)(out)

    def __add__(self, other):
        if type(other) is not type(self):
            raise TensorError("flavor mismatch in addition")
        return type(self)(self.m + other.m)

    def __sub__(self, other):
        if type(other) is not type(self):
            raise TensorError("flavor mismatch in subtraction")
        return type(self)(self.m - other.m)

    def scaled(self, c):
        out = np.empty((3, 3), dtype=object)
        for i in range(3):
            for j in range(3):
                out[i, j] = self.m[i, j] * c
        return type(self)(out)

    def __neg__(self):
        return self.scaled(-1.0)

    def max_abs_value(self):
        return float(np.max(np.abs(self.values())))

    def frobenius_sq(self):
        """Sum of squares of all nine entries (scalar, jet-exact)."""
        total = None
        for i in range(3):
            for j in range(3):
                t = self.m[i, j] * self.m[i, j]
                total = t if total is None else total + t
        return total


class Sym2Contra(_Sym2):
    """sigma^{bc}: symmetric, both indices up."""
    __slots__ = ()


class Sym2Cov(_Sym2):
    """sigma_{bc}: symmetric, both indices down."""
    __slots__ = ()


class _Vec3:
    __slots__ = ("v",)

    def __init__(self, components):
        a = np.empty(3, dtype=object)
        for i in range(3):
            a[i] = components[i]
        self.v = a

    def __getitem__(self, idx):
        return self.v[idx]

    def values(self):
        return np.array([value_part(c) for c in self.v])

    def scaled(self, c):
        return type(self)([self.v[i] * c for i in range(3)])

    def __neg__(self):
        return self.scaled(-1.0)

    def norm_sq(self):
        return self.v[0] * self.v[0] + self.v[1] * self.v[1] \
            + self.v[2] * self.v[2]


class Vector(_Vec3):
    """xi^a: index up."""
    __slots__ = ()


class Covector(_Vec3):
    """xi_a: index down."""
    __slots__ = ()


class Epsilon:
    """Volume forms eps_{abc} = scale * [abc], eps^{abc} = [abc] / scale.

    The normalisation eps^{abc} eps_{abc} = 6 holds for any nonzero scale.
    """

    __slots__ = ("scale", "inv_scale")

    def __init__(self, scale):
        self.scale = scale
        if isinstance(scale, Jet):
            self.inv_scale = 1.0 / scale
        else:
            if scale == 0.0:
                raise TensorError("epsilon scale must be nonzero")
            self.inv_scale = 1.0 / scale

    def eps_norm(self):
        """Full contraction eps^{abc} eps_{abc}; equals 6 exactly."""
        total = None
        for i, j, k, sign in PERMUTATIONS:
            t = (sign * self.scale) * (sign * self.inv_scale)
            total = t if total is None else total + t
        return total


def det_matrix(s):
    """Ordinary determinant of a symmetric 2-tensor (either flavor)."""
    m = s.m
    return (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))


def det_eps(s, eps):
    """Epsilon-contraction determinant s s s eps eps = 6 eps123^2 det(s)
    for Sym2Contra (use eps^{abc} for Sym2Cov: 6 det / eps123^2)."""
    factor = eps.scale * eps.scale if isinstance(s, Sym2Contra) \
        else eps.inv_scale * eps.inv_scale
    return 6.0 * (factor * det_matrix(s))


def _adjugate_entries(m):
    out = np.empty((3, 3), dtype=object)
    for i in range(3):
        for j in range(3):
            i1, i2 = [a for a in range(3) if a != j]
            j1, j2 = [a for a in range(3) if a != i]
            minor = m[i1, j1] * m[i2, j2] - m[i1, j2] * m[i2, j1]
            out[i, j] = minor if (i + j) % 2 == 0 else -minor
    return out


def adjugate(s):
    """Adjugate; satisfies s^{ab} adj(s)_{bc} = det_matrix(s) delta^a_c.
    Flavor flips: the adjugate of a contravariant tensor is covariant."""
    out = _adjugate_entries(s.m)
    if isinstance(s, Sym2Contra):
        return Sym2Cov(out)
    if isinstance(s, Sym2Cov):
        return Sym2Contra(out)
    raise TensorError("adjugate needs a symmetric 2-tensor")


def inverse(s):
    """Inverse via adjugate/det; jet-exact and branch-free.

    Raises TensorError when the determinant is singular at value level.
    """
    d = det_matrix(s)
    if value_part(d) == 0.0:
        raise TensorError("singular tensor has no inverse")
    inv_d = 1.0 / d
    adj = adjugate(s)
    return adj.map(lambda entry: entry * inv_d)


# ---------------------------------------------------------------------------
# Named contractions used by the pipeline

def apply_covector(s, xi):
    """xi^a = s^{ab} xi_b for Sym2Contra s (index raised by s)."""
    if not isinstance(s, Sym2Contra) or not isinstance(xi, Covector):
        raise TensorError("apply_covector contracts Sym2Contra with Covector")
    comps = []
    for a in range(3):
        t = s.m[a, 0] * xi.v[0] + s.m[a, 1] * xi.v[1] + s.m[a, 2] * xi.v[2]
        comps.append(t)
    return Vector(comps)


def apply_vector(s, v):
    """xi_a = s_{ab} v^b for Sym2Cov s (index lowered by s)."""
    if not isinstance(s, Sym2Cov) or not isinstance(v, Vector):
        raise TensorError("apply_vector contracts Sym2Cov with Vector")
    comps = []
    for a in range(3):
        t = s.m[a, 0] * v.v[0] + s.m[a, 1] * v.v[1] + s.m[a, 2] * v.v[2]
        comps.append(t)
    return Covector(comps)


def full_trace(cov, con):
    """sigma_{bc} rho^{bc}: full contraction of opposite flavors."""
    if not isinstance(cov, Sym2Cov) or not isinstance(con, Sym2Contra):
        raise TensorError("full_trace contracts Sym2Cov with Sym2Contra")
    total = None
    for b in range(3):
        for c in range(3):
            t = cov.m[b, c] * con.m[b, c]
            total = t if total is None else total + t
    return total


def pair(cov, vec):
    """xi_a v^a (or v^a xi_a)."""
    if isinstance(cov, Covector) and isinstance(vec, Vector):
        a, b = cov, vec
    elif isinstance(cov, Vector) and isinstance(vec, Covector):
        a, b = vec, cov
    else:
        raise TensorError("pair contracts a Covector with a Vector")
    return a.v[0] * b.v[0] + a.v[1] * b.v[1] + a.v[2] * b.v[2]


def delta_trace():
    """delta_a{}^a = 3 (kept as an executable convention check)."""
    return 3.0


def sym_outer(theta, phi):
    """theta^{(b} phi^{c)} as a Sym2Contra (from two Vectors)."""
    if not isinstance(theta, Vector) or not isinstance(phi, Vector):
        raise TensorError("sym_outer takes two Vectors")
    entries = [[(theta.v[b] * phi.v[c] + theta.v[c] * phi.v[b]) * 0.5
                for c in range(3)] for b in range(3)]
    return Sym2Contra(entries)


# ---------------------------------------------------------------------------
# Mixed third-order tensor A^{ab}{}_c (or the mirror layout Q_{ab}{}^c)

class Tensor3Mixed:
    """18 components A^{ab}{}_c, symmetric in (a, b).

    `variance` records which layout is stored: "uul" for V^{ab}{}_c and
    "llu" for Q_{ab}{}^c.  Contractions check it where it matters.
    """

    __slots__ = ("t", "variance")

    def __init__(self, entries, variance="uul"):
        arr = entries if isinstance(entries, np.ndarray) \
            else np.array(entries, dtype=object)
        self.t = arr
        self.variance = variance

    def __getitem__(self, idx):
        return self.t[idx]

    def values(self):
        return np.array([[[value_part(self.t[a, b, c]) for c in range(3)]
                          for b in range(3)] for a in range(3)])

    def max_abs_value(self):
        return float(np.max(np.abs(self.values())))

    def map(self, f):
        out = np.empty((3, 3, 3), dtype=object)
        for a in range(3):
            for b in range(3):
                for c in range(3):
                    out[a, b, c] = f(self.t[a, b, c])
        return Tensor3Mixed(out, self.variance)

    def __add__(self, other):
        return Tensor3Mixed(self.t + other.t, self.variance)

    def __sub__(self, other):
        return Tensor3Mixed(self.t - other.t, self.variance)

    def scaled(self, c):
        return self.map(lambda entry: entry * c)

    def trace_first_third(self):
        """A^{ab}{}_a as a length-3 array over b."""
        return [self.t[0, b, 0] + self.t[1, b, 1] + self.t[2, b, 2]
                for b in range(3)]

    def trace_second_third(self):
        """A^{ab}{}_b as a length-3 array over a."""
        return [self.t[a, 0, 0] + self.t[a, 1, 1] + self.t[a, 2, 2]
                for a in range(3)]


def tracefree_project(D):
    """Trace-free part of D_a{}^{bc} (symmetric in b, c):

        (D)_o = D_a{}^{bc} - 1/4 (delta_a^b T^c + delta_a^c T^b),
        T^c = D_d{}^{cd}.

    The pure-trace subspace delta_a{}^{(b} kappa^{c)} is exactly the kernel,
    and the result contracts to zero on (a, b).

    Input and output are (3,3,3) object arrays indexed [a][b][c].
    """
    T = [None, None, None]
    for c in range(3):
        t = D[0][c][0] + D[1][c][1] + D[2][c][2]
        T[c] = t
    out = np.empty((3, 3, 3), dtype=object)
    for a in range(3):
        for b in range(3):
            for c in range(3):
                val = D[a][b][c]
                if a == b:
                    val = val - 0.25 * T[c]
                if a == c:
                    val = val - 0.25 * T[b]
                out[a, b, c] = val
    return out
