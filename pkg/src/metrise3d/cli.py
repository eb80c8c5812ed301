"""Command-line surface: analyze, verify, scan.

Input is a single JSON document:

    {
      "name":    "optional free-form name",
      "gamma":   [[["expr" x3] x3] x3],   # gamma[a][b][c] = Gamma_{ab}^c
      "epsilon": "expr",                  # optional, default "1"
      "point":   [x, y, z]                # optional default base point
    }

Verdicts are data, not errors: any completed analysis exits 0.  Exit code
1 marks parse/IO failures, 2 marks a domain error at the requested point.
The METRISE3D_TOL environment variable overrides the default tolerance.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import csv
import json
import os
import sys
import time

import numpy as np

from . import expr as ex
from .expr import DomainError, ParseError
from .projective import ConnectionSpec, verify_metrisability_equation
from .solver import SolverOptions, decide

SCHEMA_VERSION = 1


class InputError(ValueError):
    pass


def load_document(path):
    """Read and validate an input JSON document into a ConnectionSpec."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as err:
        raise InputError(f"cannot read {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise InputError(f"{path} is not valid JSON: {err}") from err
    if not isinstance(doc, dict) or "gamma" not in doc:
        raise InputError(f"{path}: expected an object with a 'gamma' key")
    gamma = doc["gamma"]
    if (not isinstance(gamma, list) or len(gamma) != 3
            or any(len(row) != 3 for row in gamma)
            or any(len(cell) != 3 for row in gamma for cell in row)):
        raise InputError(f"{path}: 'gamma' must be a 3x3x3 array of strings")
    try:
        spec = ConnectionSpec(gamma, doc.get("epsilon"),
                              name=doc.get("name", ""))
    except (ParseError, ValueError) as err:
        raise InputError(f"{path}: {err}") from err
    point = doc.get("point")
    if point is not None:
        point = tuple(float(v) for v in point)
    return spec, point


class Report:
    """Serializable analysis report; schema-versioned.

    Timings are carried but excluded from the canonical payload so that
    repeated runs compare bit-identical.
    """

    def __init__(self, name, point, verdict, timings=None):
        self.name = name
        self.point = tuple(point)
        self.verdict = verdict
        self.timings = dict(timings or {})

    def to_dict(self, include_timings=True):
        diag = copy.deepcopy(self.verdict.diagnostics)
        diag.pop("elapsed", None)
        d = {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "point": list(self.point),
            "verdict": self.verdict.kind,
            "reason": self.verdict.reason,
            "branch": self.verdict.branch,
            "mobility": self.verdict.mobility,
            "diagnostics": diag,
        }
        if self.verdict.solution is not None:
            d["metric"] = np.asarray(self.verdict.solution.g).tolist()
            d["signature"] = list(self.verdict.solution.signature)
        if include_timings:
            d["timings"] = self.timings
        return d

    def canonical_dict(self):
        return self.to_dict(include_timings=False)

    def to_json(self, include_timings=True):
        return json.dumps(self.to_dict(include_timings), indent=2,
                          sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return json.loads(text)


def _render_report(report):
    v = report.verdict
    lines = []
    name = f" [{report.name}]" if report.name else ""
    lines.append(f"point {report.point}{name}")
    head = f"verdict: {v.kind}"
    if v.reason:
        head += f" ({v.reason})"
    if v.branch is not None:
        head += f" via branch {v.branch}"
    lines.append(head)
    lines.append(f"degree of mobility: {v.mobility}")
    d = v.diagnostics
    if "weyl_max" in d:
        lines.append(f"|V| = {d['weyl_max']:.6g}  "
                     f"(scale {d['weyl_scale']:.6g})")
    if "q_relative" in d:
        lines.append(f"|Q| relative = {d['q_relative']:.3g}")
    if "discriminant" in d:
        lines.append(f"pencil discriminant = {d['discriminant']:.6g}")
    for b in d.get("branches", []):
        root = b.get("root")
        root_s = "inf" if root is not None and np.isinf(root) else \
            (f"{root:.6g}" if root is not None else "?")
        row = f"  branch {b.get('branch')}: root {root_s}"
        if "phi" in b:
            row += f", phi={b['phi']:.6g}, psi={b['psi']:.6g}"
        if "final_residual" in b:
            row += f", final residual {b['final_residual']:.3g}"
        row += f" -> {b.get('status', 'unvisited')}"
        if b.get("reason"):
            row += f" ({b['reason']})"
        lines.append(row)
    if v.solution is not None:
        g = np.asarray(v.solution.g)
        lines.append("metric at point (up to an overall constant):")
        for row in g:
            lines.append("    [" + ", ".join(f"{x: .9g}" for x in row) + "]")
        lines.append(f"signature signs: {v.solution.signature}")
    if "elapsed" in d:
        lines.append(f"elapsed: {d['elapsed']:.3f}s")
    return "\n".join(lines)


def _options_from_args(args):
    tol = args.tol
    if tol is None:
        tol = float(os.environ.get("METRISE3D_TOL", 1e-9))
    return SolverOptions(order=args.order, tol=tol)


def cmd_analyze(args):
    spec, doc_point = load_document(args.file)
    point = _parse_point(args.point) if args.point else doc_point
    if point is None:
        raise InputError("no point: pass --point or set it in the document")
    options = _options_from_args(args)
    t0 = time.perf_counter()
    verdict = decide(spec, point, options)
    report = Report(spec.name, point, verdict,
                    timings={"decide_s": time.perf_counter() - t0})
    print(_render_report(report))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
        print(f"json report written to {args.json}")
    return 0


def cmd_verify(args):
    spec, doc_point = load_document(args.file)
    try:
        with open(args.sigma, "r", encoding="utf-8") as fh:
            sdoc = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise InputError(f"cannot read sigma file: {err}") from err
    sigma = sdoc["sigma"] if isinstance(sdoc, dict) else sdoc
    try:
        sig = [[ex.parse(sigma[b][c]) if isinstance(sigma[b][c], str)
                else ex.Const(sigma[b][c]) for c in range(3)]
               for b in range(3)]
    except ParseError as err:
        raise InputError(f"sigma does not parse: {err}") from err
    zero_rng = np.random.default_rng(5)
    if all(ex.evaluate(sig[b][c], 0.5 + zero_rng.random(3)) == 0.0
           for b in range(3) for c in range(3) for _ in range(2)):
        print("WARNING: sigma is identically zero at sampled points; "
              "a degenerate candidate makes the equation vacuous")
        print("PASS (degenerate input, residual trivially 0)")
        return 0

    tol = args.tol if args.tol is not None \
        else float(os.environ.get("METRISE3D_TOL", 1e-9))
    rng = np.random.default_rng(args.seed)
    base = np.asarray(doc_point if doc_point else (1.0, 1.0, 1.0))
    points = []
    attempts = 0
    while len(points) < args.points and attempts < args.points * 50:
        attempts += 1
        cand = base + rng.uniform(-0.4, 0.4, size=3)
        try:
            report = verify_metrisability_equation(spec, sigma, [cand])
        except DomainError:
            continue
        points.append(report["points"][0])
    if not points:
        raise InputError("no regular sample points found near the base")
    worst = max(points, key=lambda r: r["relative"])
    ok = worst["relative"] < tol
    print(f"sampled {len(points)} regular points near {tuple(base)}")
    print(f"max |(nabla sigma)_o| = {worst['residual']:.6g} "
          f"(relative {worst['relative']:.6g}) at {worst['point']}")
    print("PASS" if ok else "FAIL")
    return 0


def _parse_point(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise InputError(f"--point needs three comma-separated values, "
                         f"got {text!r}")
    return tuple(float(v) for v in parts)


def _parse_box(text):
    axes = []
    parts = text.split(",")
    if len(parts) != 3:
        raise InputError("--box needs three axis specs min:max:n")
    for part in parts:
        bits = part.split(":")
        if len(bits) != 3:
            raise InputError(f"bad box axis {part!r} (want min:max:n)")
        lo, hi, n = float(bits[0]), float(bits[1]), int(bits[2])
        if n < 1:
            raise InputError(f"box axis count must be >= 1 in {part!r}")
        axes.append(np.linspace(lo, hi, n))
    return axes


def _scan_row(spec, point, options):
    row = {"x": point[0], "y": point[1], "z": point[2], "verdict": "",
           "q_rel": "", "discriminant": "", "phi": "", "psi": "",
           "residual": ""}
    try:
        verdict = decide(spec, point, options)
    except DomainError:
        row["verdict"] = "DomainError"
        return row
    d = verdict.diagnostics
    row["verdict"] = verdict.kind + (f":{verdict.reason}"
                                     if verdict.reason else "")
    if "q_relative" in d:
        row["q_rel"] = f"{d['q_relative']:.6g}"
    if "discriminant" in d:
        row["discriminant"] = f"{d['discriminant']:.6g}"
    branch = None
    if verdict.branch is not None:
        branch = next(b for b in d.get("branches", [])
                      if b.get("branch") == verdict.branch)
    elif d.get("branches"):
        branch = d["branches"][0]
    if branch:
        if "phi" in branch:
            row["phi"] = f"{branch['phi']:.6g}"
            row["psi"] = f"{branch['psi']:.6g}"
        if "final_residual" in branch:
            row["residual"] = f"{branch['final_residual']:.6g}"
    return row


def cmd_scan(args):
    spec, _ = load_document(args.file)
    axes = _parse_box(args.box)
    options = _options_from_args(args)
    grid = [(float(x), float(y), float(z))
            for x in axes[0] for y in axes[1] for z in axes[2]]
    workers = args.workers or min(8, os.cpu_count() or 1)
    rows = [None] * len(grid)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_scan_row, spec, pt, options): i
                   for i, pt in enumerate(grid)}
        for fut in concurrent.futures.as_completed(futures):
            rows[futures[fut]] = fut.result()
    fieldnames = ["x", "y", "z", "verdict", "q_rel", "discriminant",
                  "phi", "psi", "residual"]
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out \
        else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    finally:
        if args.out:
            out.close()
            print(f"scan written to {args.out} ({len(rows)} rows)")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="metrise3d",
        description="Decide local metrisability of a torsion-free "
                    "connection on a 3-manifold and construct the metric.")
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="decide at one point")
    pa.add_argument("file")
    pa.add_argument("--point", help="x,y,z (overrides the document)")
    pa.add_argument("--order", type=int, default=3)
    pa.add_argument("--tol", type=float, default=None)
    pa.add_argument("--json", help="also write a JSON report here")
    pa.set_defaults(func=cmd_analyze)

    pv = sub.add_parser("verify", help="check a user-supplied solution")
    pv.add_argument("file")
    pv.add_argument("--sigma", required=True,
                    help="JSON with a 3x3 'sigma' of expressions")
    pv.add_argument("--points", type=int, default=10)
    pv.add_argument("--seed", type=int, default=2024)
    pv.add_argument("--tol", type=float, default=None)
    pv.set_defaults(func=cmd_verify)

    ps = sub.add_parser("scan", help="map verdicts over a grid")
    ps.add_argument("file")
    ps.add_argument("--box", required=True,
                    help="xmin:xmax:n,ymin:ymax:n,zmin:zmax:n")
    ps.add_argument("--out", help="CSV output path (default stdout)")
    ps.add_argument("--order", type=int, default=3)
    ps.add_argument("--tol", type=float, default=None)
    ps.add_argument("--workers", type=int, default=None)
    ps.set_defaults(func=cmd_scan)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except DomainError as err:
        print(f"domain error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
