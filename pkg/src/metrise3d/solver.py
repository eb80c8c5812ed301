"""Metrisability decision at a base point.

Gate sequence: vanishing invariant (projectively flat), nonzero quadratic
obstruction, degenerate pencil, irregular pencil, then per-branch: normal
form, the two scalars phi/psi that pin the candidate ray, candidate
construction, exactness of the scale 1-form, and the final necessary-and-
sufficient residual.  The first branch that passes everything wins; all
branch reports are retained.

The candidate is re-gauged to unit Frobenius norm before the scale 1-form
is computed, which makes the 1-form (and hence the reconstructed conformal
factor) independent of which pencil branch produced it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .expr import DomainError
from .jets import Jet, value_part
from .pencil import (
    DegenerateBranch,
    PencilError,
    PencilFrame,
    characteristic_cubic,
    degenerate_elements,
    is_identically_zero,
    normalize_frame,
    orthogonal_partner,
    regularity,
    unit_frobenius,
)
from .projective import (
    PipelineError,
    build_frame,
    covariant_derivative_sym2,
    extract_pencil,
)
from .tensor import (
    Covector,
    Sym2Contra,
    apply_covector,
    det_matrix,
    full_trace,
    inverse,
    pair,
    tracefree_project,
)

NOT_METRISABLE_REASONS = ("QNonzero", "PencilEntirelyDegenerate",
                          "SingularCandidate", "OmegaNotExact",
                          "FinalResidual")
INDETERMINATE_REASONS = ("IrregularPencil", "PhiPsiBothZero",
                         "NumericalDegeneracy")


class QuadratureError(RuntimeError):
    pass


@dataclass
class SolverOptions:
    order: int = 3            # jet order of the base-point pipeline
    tol: float = 1e-9         # base scale-aware tolerance for all gates
    probe_halfwidth: float = 0.25
    exactness_tol: float = 1e-10
    final_tol: float = 1e-8
    quadrature_tol: float = 1e-10
    metric_points: tuple = ()
    min_probes: int = 4


@dataclass
class PhiPsi:
    phi: Jet
    psi: Jet
    phi_scale: float
    psi_scale: float


@dataclass
class CandidateSolution:
    sigma_hat: Sym2Contra      # unit-norm candidate, jets at the base point
    omega: Covector            # scale 1-form, jets at the base point
    h: object                  # callable point -> conformal factor value
    g: np.ndarray              # metric components at the base point
    metric_at: object          # callable point -> metric components
    signature: tuple = ()      # signs of the metric eigenvalues at base


@dataclass
class Verdict:
    kind: str                  # ProjectivelyFlat | Metrisable |
    #                            NotMetrisable | Indeterminate
    reason: str | None = None
    branch: int | None = None
    solution: CandidateSolution | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def mobility(self):
        if self.kind == "ProjectivelyFlat":
            return "10"
        if self.kind == "Metrisable":
            return ">=1"
        return "0"


# ---------------------------------------------------------------------------
# phi / psi and the candidate

def compute_phi_psi(pframe, gamma):
    """The two scalars pinning the solution ray inside the pencil:

        phi = (xi^d xi_d sigma_bc - 5 xi_b xi_c) xi^a (nabla_a rho^{bc})_o
        psi = same contraction with nabla sigma.

    `pframe` provides rho, sigma, xi at some jet order k; `gamma` the
    normalised symbols at order >= k.  Output jets have order k - 1.
    """
    k = pframe.rho[0, 0].order
    m = k - 1
    sigma_inv = inverse(pframe.sigma)
    xi_up = apply_covector(pframe.sigma, pframe.xi)
    xi_sq = pair(pframe.xi, xi_up)

    M = [[xi_sq * sigma_inv[b, c] - 5.0 * (pframe.xi[b] * pframe.xi[c])
          for c in range(3)] for b in range(3)]
    Mt = [[M[b][c].truncated(m) if isinstance(M[b][c], Jet) else M[b][c]
           for c in range(3)] for b in range(3)]
    xi_t = [xi_up[a].truncated(m) if isinstance(xi_up[a], Jet) else xi_up[a]
            for a in range(3)]

    out = []
    for tensor in (pframe.rho, pframe.sigma):
        D = tracefree_project(covariant_derivative_sym2(tensor, gamma))
        total = None
        scale = 0.0
        for a in range(3):
            for b in range(3):
                for c in range(3):
                    term = Mt[b][c] * xi_t[a] * D[a, b, c]
                    total = term if total is None else total + term
                    scale += abs(value_part(term))
        out.append((total, scale))
    (phi, phi_scale), (psi, psi_scale) = out
    return PhiPsi(phi=phi, psi=psi, phi_scale=max(phi_scale, 1e-300),
                  psi_scale=max(psi_scale, 1e-300))


def candidate_sigma_hat(pframe, pp, tol=1e-9):
    """Resolve the pencil ray from phi/psi.

    Returns ("ok", sigma_hat) with sigma_hat at unit Frobenius norm, or a
    failure pair: ("SingularCandidate" | "PhiPsiBothZero", None).
    """
    k = pframe.rho[0, 0].order
    m = k - 1
    phi_zero = abs(pp.phi.value) <= tol * pp.phi_scale
    psi_zero = abs(pp.psi.value) <= tol * pp.psi_scale
    if phi_zero and psi_zero:
        return "PhiPsiBothZero", None
    if phi_zero:
        # the purported solution is f * rho, which is singular
        return "SingularCandidate", None
    ratio = pp.psi / pp.phi
    sig = pframe.sigma.map(lambda e: e.truncated(m))
    rho = pframe.rho.map(lambda e: e.truncated(m))
    sigma_hat = Sym2Contra(
        [[sig[b, c] - ratio * rho[b, c] for c in range(3)] for b in range(3)])
    vals = sigma_hat.values()
    det = float(np.linalg.det(vals))
    if abs(det) <= tol * max(float(np.max(np.abs(vals))), 1e-300)**3:
        return "SingularCandidate", None
    return "ok", unit_frobenius(sigma_hat, sign_rule="any")


# ---------------------------------------------------------------------------
# scale 1-form, exactness, final residual

def omega_from(sigma_hat, gamma):
    """omega_a = sigma_bc (nabla_a sigma^{bc})_o for a nonsingular jet
    field; one jet order below sigma_hat."""
    m = sigma_hat[0, 0].order - 1
    D = tracefree_project(covariant_derivative_sym2(sigma_hat, gamma))
    sinv = inverse(sigma_hat.map(lambda e: e.truncated(m)))
    comps = []
    for a in range(3):
        total = None
        for b in range(3):
            for c in range(3):
                t = sinv[b, c] * D[a, b, c]
                total = t if total is None else total + t
        comps.append(total)
    return Covector(comps)


def exactness_residual(omega):
    """max |d_a omega_b - d_b omega_a| read from the jets (order >= 1)."""
    resid = 0.0
    scale = 1.0
    for a in range(3):
        ga = omega[a].gradient
        scale = max(scale, float(np.max(np.abs(ga))))
    for a in range(3):
        for b in range(a + 1, 3):
            d_ab = omega[b].gradient[a]
            d_ba = omega[a].gradient[b]
            resid = max(resid, abs(d_ab - d_ba))
    return resid, scale


def final_residual(sigma_hat, omega, gamma):
    """Relative residual of (nabla_a s^{bc} - (2/5) omega_a s^{bc})_o at
    value level."""
    m = sigma_hat[0, 0].order - 1
    D = covariant_derivative_sym2(sigma_hat, gamma)
    st = sigma_hat.map(lambda e: e.truncated(m))
    om = [omega[a].truncated(m) if omega[a].order > m else omega[a]
          for a in range(3)]
    E = np.empty((3, 3, 3), dtype=object)
    scale = 0.0
    for a in range(3):
        for b in range(3):
            for c in range(3):
                corr = 0.4 * (om[a] * st[b, c])
                E[a, b, c] = D[a, b, c] - corr
                scale = max(scale, abs(value_part(D[a, b, c])),
                            abs(value_part(corr)))
    P = tracefree_project(E)
    resid = max(abs(value_part(P[a, b, c])) for a in range(3)
                for b in range(3) for c in range(3))
    return resid / max(scale, 1e-300)


# ---------------------------------------------------------------------------
# probe-point machinery

def probe_points(base, halfwidth):
    """The base point plus the 8 vertices of the surrounding box."""
    pts = [tuple(base)]
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            for sz in (-1.0, 1.0):
                pts.append((base[0] + sx * halfwidth,
                            base[1] + sy * halfwidth,
                            base[2] + sz * halfwidth))
    return pts


def _pipeline_candidate(spec, point, order, tol):
    """Run the full pipeline at a point and return (sigma_hat, frame),
    taking the first branch that yields a nonsingular candidate.  The
    unit-norm gauge makes the result branch-independent, so probe points
    and quadrature nodes never need explicit branch matching.  Returns
    None when any stage fails."""
    try:
        frame = build_frame(spec, point, order)
        vmax = frame.weyl.max_abs_value()
        if vmax <= tol * frame.weyl_scale():
            return None
        qmax = frame.q.max_abs_value()
        qscale = abs(value_part(frame.eps.scale)) * vmax**2
        if qmax > tol * max(qscale, 1e-300):
            return None
        span = extract_pencil(frame, tol)
        branches = degenerate_elements(span, tol)
        for branch in branches:
            try:
                H = orthogonal_partner(span, branch.N, tol)
                pframe = normalize_frame(span, branch.N, branch.xi, H)
            except PencilError:
                continue
            pp = compute_phi_psi(pframe, frame.gamma)
            status, sigma_hat = candidate_sigma_hat(pframe, pp, tol)
            if status == "ok":
                return sigma_hat, frame
        return None
    except (DomainError, PipelineError, PencilError):
        return None


def _omega_value(spec, point, tol):
    """Value of the scale 1-form at a point (order-2 pipeline)."""
    got = _pipeline_candidate(spec, point, 2, tol)
    if got is None:
        raise QuadratureError(f"pipeline failed at quadrature node {point}")
    sigma_hat, frame = got
    om = omega_from(sigma_hat, frame.gamma)
    return np.array([om[a].value for a in range(3)])


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def line_integral(vector_field, p, q, abs_tol=1e-10, max_doublings=7):
    """integral over the straight segment [p, q] of field . d(gamma), by
    composite Gauss-Legendre with panel doubling until two consecutive
    levels agree to abs_tol."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = q - p
    if not np.any(d):
        return 0.0

    def level(panels):
        total = 0.0
        width = 1.0 / panels
        for k in range(panels):
            mid = (k + 0.5) * width
            for node, w in zip(_GL_NODES, _GL_WEIGHTS):
                t = mid + 0.5 * width * node
                val = vector_field(tuple(p + t * d))
                total += w * 0.5 * width * float(val @ d)
        return total

    prev = level(1)
    panels = 2
    for _ in range(max_doublings):
        cur = level(panels)
        if abs(cur - prev) < abs_tol:
            return cur
        prev = cur
        panels *= 2
    raise QuadratureError(
        f"line integral did not reach {abs_tol:g} after {panels // 2} panels")


def reconstruct_h(omega_value_fn, base, target, abs_tol=1e-10):
    """Conformal factor h with h(base) = 1:
    h(q) = exp(-(2/5) * integral of omega along [base, q])."""
    integral = line_integral(omega_value_fn, base, target, abs_tol)
    return math.exp(-0.4 * integral)


def scale_test(spec, sigma_accessor, base, probes, options):
    """Exactness of the scale 1-form over the probe stencil.

    `sigma_accessor(point)` returns (sigma_hat jets, frame) or None for
    points outside the regular domain.  Returns a dict with per-point
    omegas and the worst curl residual; callers decide the verdict.
    """
    rows = []
    for pt in probes:
        got = sigma_accessor(pt)
        if got is None:
            continue
        sigma_hat, frame = got
        om = omega_from(sigma_hat, frame.gamma)
        resid, scale = exactness_residual(om)
        rows.append({"point": tuple(pt), "omega": om,
                     "sigma_hat": sigma_hat, "frame": frame,
                     "curl_residual": resid, "curl_scale": scale})
    if not rows:
        return {"status": "NoProbes", "rows": rows, "max_curl": math.inf}
    max_curl = max(r["curl_residual"] / max(1.0, r["curl_scale"])
                   for r in rows)
    exact = max_curl < options.exactness_tol
    return {"status": "exact" if exact else "OmegaNotExact",
            "rows": rows, "max_curl": max_curl}


# ---------------------------------------------------------------------------
# metric assembly

def _metric_values(sigma_hat_values, h, eps_value):
    M = h * np.asarray(sigma_hat_values, dtype=float)
    detm = float(np.linalg.det(M))
    if abs(detm) <= 1e-300:
        raise QuadratureError("candidate degenerated at a metric point")
    det_eps = 6.0 * eps_value**2 * detm
    return np.linalg.inv(M) / det_eps


def _make_solution(spec, base, sigma_hat, omega, options):
    eps_base = ex.evaluate(spec.epsilon, base)
    tol = options.tol
    qtol = options.quadrature_tol

    def omega_value_fn(point):
        return _omega_value(spec, point, tol)

    def h_at(point):
        pt = tuple(float(v) for v in point)
        if pt == tuple(base):
            return 1.0
        return reconstruct_h(omega_value_fn, base, pt, qtol)

    def metric_at(point):
        pt = tuple(float(v) for v in point)
        if pt == tuple(base):
            return _metric_values(sigma_hat.values(), 1.0, eps_base)
        got = _pipeline_candidate(spec, pt, 2, tol)
        if got is None:
            raise QuadratureError(f"pipeline failed at metric point {pt}")
        sh, _ = got
        return _metric_values(sh.values(), h_at(pt),
                              ex.evaluate(spec.epsilon, pt))

    g = _metric_values(sigma_hat.values(), 1.0, eps_base)
    eig = np.linalg.eigvalsh(g)
    signature = tuple(int(np.sign(v)) for v in eig)
    return CandidateSolution(sigma_hat=sigma_hat, omega=omega, h=h_at,
                             g=g, metric_at=metric_at, signature=signature)


# ---------------------------------------------------------------------------
# decide

def decide(spec, point, options=None):
    """Full decision at a base point; returns a Verdict.

    Only I/O, parse and domain errors escape; every analysis outcome is a
    Verdict variant carrying the diagnostic trace.
    """
    options = options or SolverOptions()
    t0 = time.perf_counter()
    base = tuple(float(v) for v in point)
    tol = options.tol
    diag = {"point": base, "order": options.order, "tol": tol}

    frame = build_frame(spec, base, options.order)
    diag["eps_value"] = value_part(frame.eps.scale)
    diag["upsilon"] = list(frame.upsilon_values)

    vmax = frame.weyl.max_abs_value()
    diag["weyl_max"] = vmax
    diag["weyl_scale"] = frame.weyl_scale()
    if vmax <= tol * frame.weyl_scale():
        diag["mobility"] = "10"
        diag["elapsed"] = time.perf_counter() - t0
        return Verdict(kind="ProjectivelyFlat", diagnostics=diag)

    qmax = frame.q.max_abs_value()
    qscale = max(abs(value_part(frame.eps.scale)) * vmax**2, 1e-300)
    diag["q_max"] = qmax
    diag["q_relative"] = qmax / qscale
    if qmax > tol * qscale:
        diag["elapsed"] = time.perf_counter() - t0
        return Verdict(kind="NotMetrisable", reason="QNonzero",
                       diagnostics=diag)

    try:
        span = extract_pencil(frame, tol)
    except PipelineError as err:
        diag["error"] = str(err)
        diag["elapsed"] = time.perf_counter() - t0
        return Verdict(kind="Indeterminate", reason="NumericalDegeneracy",
                       diagnostics=diag)
    diag["gram_ratio"] = span.gram_ratio
    diag["rebuild_residual"] = span.rebuild_residual

    return _decide_span(spec, frame, span, options, diag, t0)


def _decide_span(spec, frame, span, options, diag, t0):
    """Gates 3 onward, callable directly with a synthetic span."""
    tol = options.tol
    base = frame.point
    cubic = characteristic_cubic(span.rho_raw, span.sigma_raw)
    elem_scale = max(span.rho_raw.max_abs_value(),
                     span.sigma_raw.max_abs_value(), 1e-300)
    diag["cubic"] = [value_part(c) for c in cubic.c]
    diag["discriminant"] = cubic.discriminant()
    if is_identically_zero(cubic, elem_scale, tol):
        diag["elapsed"] = time.perf_counter() - t0
        return Verdict(kind="NotMetrisable",
                       reason="PencilEntirelyDegenerate", diagnostics=diag)
    if regularity(cubic, tol) == "Irregular":
        diag["elapsed"] = time.perf_counter() - t0
        return Verdict(kind="Indeterminate", reason="IrregularPencil",
                       diagnostics=diag)

    try:
        branches = degenerate_elements(span, tol)
    except PencilError as err:
        diag["error"] = str(err)
        diag["elapsed"] = time.perf_counter() - t0
        return Verdict(kind="Indeterminate", reason="NumericalDegeneracy",
                       diagnostics=diag)

    probes = probe_points(base, options.probe_halfwidth)

    def sigma_accessor(pt):
        if tuple(pt) == base:
            return None  # replaced per-branch below
        return _pipeline_candidate(spec, pt, options.order, tol)

    branch_reports = []
    diag["branches"] = branch_reports
    for idx, branch in enumerate(branches):
        report = {"branch": idx, "root": branch.root,
                  "xi": list(branch.xi.values())}
        branch_reports.append(report)
        try:
            H = orthogonal_partner(span, branch.N, tol)
            pframe = normalize_frame(span, branch.N, branch.xi, H,
                                     branch=idx, root=branch.root)
        except PencilError as err:
            report.update(status="Indeterminate",
                          reason="NumericalDegeneracy", error=str(err))
            continue

        pp = compute_phi_psi(pframe, frame.gamma)
        report["phi"] = pp.phi.value
        report["psi"] = pp.psi.value
        status, sigma_hat = candidate_sigma_hat(pframe, pp, tol)
        if status != "ok":
            kind = "Indeterminate" if status == "PhiPsiBothZero" \
                else "NotMetrisable"
            report.update(status=kind, reason=status)
            continue

        def accessor(pt, _sh=sigma_hat):
            if tuple(pt) == base:
                return _sh, frame
            return sigma_accessor(pt)

        scale = scale_test(spec, accessor, base, probes, options)
        surviving = len(scale["rows"])
        report["surviving_probes"] = surviving
        report["max_curl"] = scale["max_curl"]
        if surviving < options.min_probes:
            report.update(status="Indeterminate",
                          reason="NumericalDegeneracy")
            continue
        if scale["status"] != "exact":
            report.update(status="NotMetrisable", reason="OmegaNotExact")
            continue

        worst = 0.0
        for row in scale["rows"]:
            r = final_residual(row["sigma_hat"], row["omega"],
                               row["frame"].gamma)
            worst = max(worst, r)
        report["final_residual"] = worst
        if worst >= options.final_tol:
            report.update(status="NotMetrisable", reason="FinalResidual")
            continue

        report["status"] = "Metrisable"
        base_row = next(r for r in scale["rows"]
                        if r["point"] == tuple(base))
        solution = _make_solution(spec, base, sigma_hat,
                                  base_row["omega"], options)
        diag["metric_base"] = solution.g.tolist()
        diag["signature"] = list(solution.signature)
        diag["mobility"] = ">=1"
        diag["elapsed"] = time.perf_counter() - t0
        return Verdict(kind="Metrisable", branch=idx, solution=solution,
                       diagnostics=diag)

    # no branch produced a verified solution; aggregate
    diag["elapsed"] = time.perf_counter() - t0
    for report in branch_reports:
        if report.get("status") == "NotMetrisable":
            return Verdict(kind="NotMetrisable", reason=report["reason"],
                           branch=report["branch"], diagnostics=diag)
    for report in branch_reports:
        if report.get("status") == "Indeterminate":
            return Verdict(kind="Indeterminate", reason=report["reason"],
                           branch=report["branch"], diagnostics=diag)
    return Verdict(kind="Indeterminate", reason="NumericalDegeneracy",
                   diagnostics=diag)


def decide_span(spec, frame, span, options=None):
    """Run gates 3+ on an externally supplied span (synthetic pencils)."""
    options = options or SolverOptions()
    diag = {"point": frame.point, "order": frame.order, "synthetic": True}
    return _decide_span(spec, frame, span, options, diag,
                        time.perf_counter())
