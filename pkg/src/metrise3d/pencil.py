"""Linear algebra of a nonsingular pencil of symmetric 3x3 tensors.

Given the span {s*rho + t*sigma} recovered from the projective invariant,
this module finds its real degenerate elements (roots of a binary cubic,
lifted to jets so the result is a smooth local field), the kernel covector
of each, the unique trace-orthogonal nonsingular partner, and packages the
gauge-fixed normal form used by the solver: sigma invertible,
trace(sigma^{-1} rho) = 0, rho xi = 0.

Also houses the classifier for 3-dimensional spaces of entirely degenerate
symmetric matrices (common-kernel type vs common-factor type).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .jets import Jet, jet_sqrt, lift_root, value_part
from .tensor import (
    Covector,
    Sym2Contra,
    adjugate,
    det_matrix,
    full_trace,
    inverse,
)

INFINITY_ROOT = math.inf


class PencilError(RuntimeError):
    pass


@dataclass
class BinaryCubic:
    """chi(s, t) = det(s N + t H) expanded as sum_k c[k] s^k t^(3-k).

    Built with the ordinary matrix determinant; the epsilon-contraction
    determinant differs by the constant 6 eps123^2, which does not move
    the roots.
    """

    c: list  # four jet coefficients, c[k] multiplies s^k t^(3-k)

    def values(self):
        return np.array([value_part(ck) for ck in self.c])

    def discriminant(self):
        c0, c1, c2, c3 = self.values()
        return (18.0 * c3 * c2 * c1 * c0 - 4.0 * c2**3 * c0
                + c2**2 * c1**2 - 4.0 * c3 * c1**3 - 27.0 * c3**2 * c0**2)

    def scale(self):
        return max(float(np.max(np.abs(self.values()))), 1e-300)


def characteristic_cubic(N, H):
    """Exact expansion of det(s N + t H) over the six permutations."""
    perms = ((0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0),
             (0, 2, 1, -1.0), (2, 1, 0, -1.0), (1, 0, 2, -1.0))
    c = [None, None, None, None]
    for p0, p1, p2, sign in perms:
        n = (N[0, p0], N[1, p1], N[2, p2])
        h = (H[0, p0], H[1, p1], H[2, p2])
        terms = {
            3: n[0] * n[1] * n[2],
            2: n[0] * n[1] * h[2] + n[0] * h[1] * n[2] + h[0] * n[1] * n[2],
            1: n[0] * h[1] * h[2] + h[0] * n[1] * h[2] + h[0] * h[1] * n[2],
            0: h[0] * h[1] * h[2],
        }
        for k, t in terms.items():
            t = sign * t
            c[k] = t if c[k] is None else c[k] + t
    return BinaryCubic(c=c)


def is_identically_zero(cubic, element_scale, tol=1e-9):
    """All four coefficients below tolerance of the natural cubic scale."""
    scale = max(element_scale**3, 1e-300)
    return bool(np.all(np.abs(cubic.values()) <= tol * scale))


def regularity(cubic, tol=1e-9):
    """'Regular' iff the binary cubic has three distinct projective roots,
    decided by the discriminant of the value parts."""
    scale = max(float(np.sum(np.abs(cubic.values()))), 1e-300)
    disc = cubic.discriminant()
    return "Regular" if abs(disc) > tol * scale**4 else "Irregular"


@dataclass
class DegenerateBranch:
    """One real degenerate element of the pencil, jet-valued."""

    root: float                # s/t, or math.inf for the (1:0) root
    N: Sym2Contra              # the degenerate element
    xi: Covector               # unit kernel covector, sign-fixed
    root_jet: Jet              # lifted chart coordinate of the root
    chart: str                 # "t=1" (N = u rho + sigma) or "s=1"


def _real_roots_of_cubic(values, tol):
    """Real projective roots (as s/t ratios, math.inf allowed) of the
    value-level binary cubic."""
    c0, c1, c2, c3 = values
    scale = max(float(np.max(np.abs(values))), 1e-300)
    coeffs = [c3, c2, c1, c0]          # highest degree first for np.roots
    n_inf = 0
    while coeffs and abs(coeffs[0]) <= tol * scale:
        coeffs.pop(0)
        n_inf += 1
    if len(coeffs) <= 1:
        raise PencilError("characteristic cubic is numerically degenerate")
    roots = np.roots(coeffs)
    out = []
    for z in roots:
        if abs(z.imag) <= 1e-7 * (1.0 + abs(z)):
            out.append(float(z.real))
    out.sort()
    out.extend([INFINITY_ROOT] * n_inf)
    return out


def _unit_covector(comps, tol):
    vals = np.array([value_part(c) for c in comps])
    vmax = float(np.max(np.abs(vals)))
    if vmax <= 0.0:
        raise PencilError("kernel covector vanishes at value level")
    # pre-scale to O(1) so the jet square root is well conditioned
    comps = [c * (1.0 / vmax) for c in comps]
    n2 = comps[0] * comps[0] + comps[1] * comps[1] + comps[2] * comps[2]
    inv_norm = 1.0 / jet_sqrt(n2) if isinstance(n2, Jet) \
        else 1.0 / math.sqrt(n2)
    unit = [c * inv_norm for c in comps]
    uvals = np.array([value_part(c) for c in unit])
    k = int(np.argmax(np.abs(uvals)))
    if uvals[k] < 0.0:
        unit = [-c for c in unit]
    return Covector(unit)


def degenerate_elements(span, tol=1e-9):
    """Real degenerate elements of the pencil with their kernel covectors.

    Roots are found at value level and lifted to jets in the affine chart
    where they are best conditioned; the kernel is read from the dominant
    column of the adjugate (rank one for a rank-two symmetric element).
    Returns one or three branches, sorted by ascending root ratio with the
    infinite root last.
    """
    rho, sigma = span.rho_raw, span.sigma_raw
    cubic = characteristic_cubic(rho, sigma)
    elem_scale = max(rho.max_abs_value(), sigma.max_abs_value(), 1e-300)
    if is_identically_zero(cubic, elem_scale, tol):
        raise PencilError("pencil is entirely degenerate")
    roots = _real_roots_of_cubic(cubic.values(), tol)
    if not roots:
        raise PencilError("no real root of a real cubic (internal error)")

    branches = []
    for u in roots:
        if not math.isinf(u) and abs(u) <= 1.0:
            root_jet = lift_root(cubic.c, u, tol)
            N = Sym2Contra(
                [[rho[i, j] * root_jet + sigma[i, j] for j in range(3)]
                 for i in range(3)])
            chart = "t=1"
        else:
            v = 0.0 if math.isinf(u) else 1.0 / u
            root_jet = lift_root(list(reversed(cubic.c)), v, tol)
            N = Sym2Contra(
                [[rho[i, j] + sigma[i, j] * root_jet for j in range(3)]
                 for i in range(3)])
            chart = "s=1"
        adj = adjugate(N)
        avals = adj.values()
        nscale = max(N.max_abs_value(), 1e-300)
        if float(np.max(np.abs(avals))) <= tol * nscale**2:
            # rank <= 1 element; kernel is 2-dimensional, branch unusable
            continue
        col = int(np.argmax(np.sum(avals * avals, axis=0)))
        xi = _unit_covector([adj[b, col] for b in range(3)], tol)
        branches.append(DegenerateBranch(root=u, N=N, xi=xi,
                                         root_jet=root_jet, chart=chart))
    if not branches:
        raise PencilError("every degenerate element has rank <= 1")
    return branches


def _quadratic_jets(p0, p1, p2):
    """Coefficients a + b u + c u^2 from values at u = 0, 1, 2."""
    a = p0
    cc = (p2 - 2.0 * p1 + p0) * 0.5
    b = p1 - p0 - cc
    return a, b, cc


def orthogonal_partner(span, N, tol=1e-9):
    """The nonsingular pencil element H with trace(H^{-1} N) = 0.

    Writes H = M + u N for a span element M independent of N, interpolates
    p(u) = trace(adj(M + u N) N) from u in {0, 1, 2} in jet arithmetic,
    takes its unique real root with nonsingular H, lifts the root to jets,
    and returns H at unit Frobenius norm with the largest-|value| diagonal
    entry positive.
    """
    nvec = _sym_values_vec(N)
    nhat = nvec / max(float(np.linalg.norm(nvec)), 1e-300)
    candidates = []
    for name, M in (("rho", span.rho_raw), ("sigma", span.sigma_raw)):
        mvec = _sym_values_vec(M)
        ortho = mvec - (mvec @ nhat) * nhat
        candidates.append((float(np.linalg.norm(ortho)), name, M))
    candidates.sort(key=lambda t: -t[0])
    if candidates[0][0] <= tol * max(np.linalg.norm(nvec), 1e-300):
        raise PencilError("span collapses onto the degenerate element")
    M = candidates[0][2]

    samples = []
    for u in (0.0, 1.0, 2.0):
        Hu = Sym2Contra([[M[i, j] + u * N[i, j] for j in range(3)]
                         for i in range(3)])
        samples.append(full_trace(adjugate(Hu), N))
    a, b, cc = _quadratic_jets(*samples)

    av, bv, cv = value_part(a), value_part(b), value_part(cc)
    mscale = max(M.max_abs_value(), N.max_abs_value(), 1e-300)
    pscale = max(abs(av), abs(bv), abs(cv), tol * mscale**3)
    if max(abs(bv), abs(cv)) <= tol * pscale:
        if abs(av) <= tol * pscale:
            raise PencilError(
                "every pencil element is trace-orthogonal to N "
                "(uniqueness of the partner fails)")
        raise PencilError("no trace-orthogonal partner exists in the pencil")
    if abs(cv) <= tol * pscale:
        roots = [-av / bv]
    else:
        disc = bv * bv - 4.0 * cv * av
        if disc < 0.0:
            raise PencilError("no real trace-orthogonal direction")
        sq = math.sqrt(disc)
        roots = sorted({(-bv - sq) / (2.0 * cv), (-bv + sq) / (2.0 * cv)})

    valid = []
    for u0 in roots:
        Hv = M.values() + u0 * N.values()
        if abs(_det3(Hv)) > tol * max(np.max(np.abs(Hv)), 1e-300)**3:
            valid.append(u0)
    if not valid:
        raise PencilError(
            "no root yields a nonsingular partner (pencil irregular "
            "in disguise)")
    if len(valid) > 1 and abs(valid[0] - valid[1]) > tol * (
            1.0 + abs(valid[0]) + abs(valid[1])):
        raise PencilError(
            "two distinct trace-orthogonal nonsingular partners "
            "(violates uniqueness)")

    u0 = valid[0]
    u_jet = lift_root([a, b, cc], u0, tol)
    H = Sym2Contra([[M[i, j] + u_jet * N[i, j] for j in range(3)]
                    for i in range(3)])
    H = unit_frobenius(H, sign_rule="diagonal")

    # trace(H^{-1} N) must vanish as a jet
    Hinv = inverse(H)
    resid = full_trace(Hinv, N)
    rscale = max(9.0 * _coeff_scale(Hinv) * _coeff_scale(N), 1e-300)
    rmax = resid.max_abs_coeff if isinstance(resid, Jet) else abs(resid)
    if rmax > 1e-10 * rscale:
        raise PencilError(
            f"partner fails trace orthogonality (residual {rmax:.3g} "
            f"vs scale {rscale:.3g})")
    return H


def _det3(m):
    return float(np.linalg.det(np.asarray(m, dtype=float)))


def _coeff_scale(obj):
    """Largest |jet coefficient| over the entries of a tensor container."""
    flat = obj.m.ravel() if hasattr(obj, "m") else obj.v
    out = 0.0
    for e in flat:
        m = e.max_abs_coeff if isinstance(e, Jet) else abs(float(e))
        out = max(out, m)
    return out


def _sym_values_vec(s):
    v = s.values()
    r2 = math.sqrt(2.0)
    return np.array([v[0, 0], v[1, 1], v[2, 2],
                     r2 * v[0, 1], r2 * v[0, 2], r2 * v[1, 2]])


def unit_frobenius(s, sign_rule="any"):
    """Scale a symmetric tensor to unit Frobenius norm (jet arithmetic)
    and fix the sign deterministically."""
    vmax = s.max_abs_value()
    if vmax <= 0.0:
        raise PencilError("cannot normalise a tensor vanishing at value "
                          "level")
    s = s.scaled(1.0 / vmax)
    n2 = s.frobenius_sq()
    inv_norm = 1.0 / jet_sqrt(n2) if isinstance(n2, Jet) \
        else 1.0 / math.sqrt(n2)
    out = s.scaled(inv_norm)
    vals = out.values()
    if sign_rule == "diagonal":
        k = int(np.argmax(np.abs(np.diag(vals))))
        flip = vals[k, k] < 0.0
    else:
        k = np.unravel_index(int(np.argmax(np.abs(vals))), vals.shape)
        flip = vals[k] < 0.0
    return out.scaled(-1.0) if flip else out


@dataclass
class PencilFrame:
    """The gauge-fixed normal form: rho degenerate (unit norm), sigma
    nonsingular and trace-orthogonal to rho (unit norm), xi the unit
    kernel covector of rho; all jet-valued smooth local fields."""

    rho: Sym2Contra
    sigma: Sym2Contra
    xi: Covector
    branch: int = 0
    root: float = 0.0

    def validate(self, tol=1e-10):
        sv = self.sigma.values()
        if abs(_det3(sv)) <= 1e-9 * max(np.max(np.abs(sv)), 1e-300)**3:
            raise PencilError("frame sigma is singular at value level")
        sinv = inverse(self.sigma)
        scale_t = max(9.0 * _coeff_scale(sinv) * _coeff_scale(self.rho), 1.0)
        trace = full_trace(sinv, self.rho)
        tmax = trace.max_abs_coeff if isinstance(trace, Jet) else abs(trace)
        if tmax > tol * scale_t:
            raise PencilError(f"frame trace condition fails ({tmax:.3g})")
        scale_k = max(3.0 * _coeff_scale(self.rho), 1.0)
        for b in range(3):
            t = None
            for c in range(3):
                term = self.rho[b, c] * self.xi[c]
                t = term if t is None else t + term
            tm = t.max_abs_coeff if isinstance(t, Jet) else abs(t)
            if tm > tol * scale_k:
                raise PencilError(f"frame kernel condition fails ({tm:.3g})")
        return self


def normalize_frame(span, N, xi, H, branch=0, root=0.0):
    """Apply the gauge: rho = N at unit Frobenius norm (largest-|value|
    component positive), sigma = H (already normalised), xi as given.
    Validates the three normal-form conditions."""
    rho = unit_frobenius(N, sign_rule="any")
    frame = PencilFrame(rho=rho, sigma=H, xi=xi, branch=branch, root=root)
    return frame.validate()


# ---------------------------------------------------------------------------
# Classifier for 3-spaces of degenerate symmetric matrices

def classify_subspace(basis, tol=1e-9, samples=20, seed=509):
    """Classify a 3-dimensional space of symmetric matrices.

    Returns 'NotDegenerate' if some combination has nonzero determinant
    (sampled deterministically), else 'W1' when one covector annihilates
    every element, else 'W2' when every element shares a common symmetric
    factor vector, else 'Other'.
    """
    mats = [np.asarray(B.values() if hasattr(B, "values") else B,
                       dtype=float) for B in basis]
    if len(mats) != 3:
        raise ValueError("classify_subspace expects a basis of 3 elements")
    scale = max(max(float(np.max(np.abs(m))) for m in mats), 1e-300)

    rng = np.random.default_rng(seed)
    for _ in range(samples):
        c = rng.uniform(-1.0, 1.0, size=3)
        comb = c[0] * mats[0] + c[1] * mats[1] + c[2] * mats[2]
        if abs(_det3(comb)) > tol * (float(np.sum(np.abs(c))) * scale)**3:
            return "NotDegenerate"

    # W1: common kernel covector of all three elements
    stacked = np.vstack(mats)  # (9, 3)
    _, sv, vt = np.linalg.svd(stacked)
    if sv[-1] <= 1e-7 * max(sv[0], 1e-300):
        return "W1"

    # W2: common factor theta; kernels n_i of the elements all lie in
    # theta's orthogonal plane, so theta spans the null space of the
    # stacked kernels.
    kernels = []
    for m in mats:
        _, svm, vtm = np.linalg.svd(m)
        if svm[-1] > 1e-7 * max(svm[0], 1e-300):
            return "Other"  # an element is nondegenerate pointwise
        kernels.append(vtm[-1])
    K = np.vstack(kernels)
    _, svk, vtk = np.linalg.svd(K)
    theta = vtk[-1]
    if svk[-1] > 1e-7 * max(svk[0], 1e-300):
        return "Other"
    P = np.eye(3) - np.outer(theta, theta)
    for m in mats:
        compressed = P @ m @ P
        if float(np.max(np.abs(compressed))) > 1e-7 * scale:
            return "Other"
    return "W2"
