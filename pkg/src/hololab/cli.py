"""Command-line front end: ``hololab <command> <manifest> [flags]``.

The manifest argument is a catalog id (``sphere-2``, ``product(sphere-2,sphere-2)``,
``cp2`` for ``homog``) or a path to a YAML manifest.  Reports are JSON with
sorted keys; every measured number is written as ``{"value": v, "tol": t}``.
Exit codes: 0 success, 2 validation error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import span_of, stabilizer
from .catalog import CatalogError, Manifold, builtin, catalog_listing
from .chart import ChartError, DegenerateMetricError, DomainError, riemann
from .classify import ClassificationError, berger_classify, classify, detect_reducible
from .decomp import CurvatureInputError, decompose
from .expr import ExprError
from .gstructures import (FormError, form_hodge_star, g2_torsion_check, hk_relations, kahler_check,
                          spin7_torsion_check)
from .holonomy import (DEFAULT_EPS_SCHEDULE, DEFAULT_SEED, HolonomyError, N_RANDOM_SAMPLES, compare_algebras,
                       curvature_span_algebra, loop_holonomy_algebra, sample_points)
from .homogeneous import (HOMOGENEOUS_CATALOG, HomogeneousError, ReductiveSplit, canonical_torsion,
                          check_symmetric, homogeneous_model, isotropy_representation, symmetric_holonomy)
from .manifest import ManifestError, load
from .transport import STEPS_PER_UNIT, TransportError, basepoint_frame, loop_rectangle, parallel_transport

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
SIG_DIGITS = 12


class UsageError(ValueError):
    pass


class NumericFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# JSON helpers
# ---------------------------------------------------------------------------

def _round(x):
    x = float(x)
    if not np.isfinite(x):
        raise NumericFailure("non-finite value in report")
    r = float(f"{x:.{SIG_DIGITS}g}")
    return 0.0 if r == 0 else r


def num(value, tol):
    """A measured quantity with the tolerance it was judged against."""
    if isinstance(value, (bool, np.bool_)):
        return {"value": bool(value), "tol": _round(tol)}
    if isinstance(value, (int, np.integer)):
        return {"value": int(value), "tol": _round(tol)}
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return {"value": _round(arr), "tol": _round(tol)}
    return {"value": np.vectorize(_round, otypes=[float])(arr).tolist(), "tol": _round(tol)}


def dumps(report) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


class Stopwatch:
    def __init__(self):
        self.stages = {}

    def run(self, name, fn, *args, **kw):
        t = time.perf_counter()
        out = fn(*args, **kw)
        self.stages[name] = round(time.perf_counter() - t, 4)
        return out


# ---------------------------------------------------------------------------
# Input resolution
# ---------------------------------------------------------------------------

def resolve_manifold(ref: str) -> Manifold:
    path = Path(ref)
    if path.suffix in (".yaml", ".yml") or path.exists():
        obj = load(path)
        if isinstance(obj, ReductiveSplit):
            raise UsageError(f"{ref} is a Lie-algebra manifest; use the 'homog' command")
        return obj
    try:
        return builtin(ref)
    except CatalogError as exc:
        raise UsageError(f"{ref!r} is neither a manifest file nor a catalog id ({exc})") from None


def resolve_split(ref: str) -> ReductiveSplit:
    path = Path(ref)
    if path.suffix in (".yaml", ".yml") or path.exists():
        obj = load(path)
        if not isinstance(obj, ReductiveSplit):
            raise UsageError(f"{ref} is a manifold manifest; 'homog' needs a Lie-algebra manifest")
        return obj
    return homogeneous_model(ref)


def _floats(text, what):
    try:
        vals = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers") from None
    if not vals:
        raise UsageError(f"{what} is empty")
    return vals


def _samples(man, args):
    k = N_RANDOM_SAMPLES if args.points is None else args.points
    if k < 0:
        raise UsageError("--points must be >= 0")
    return sample_points(man.chart, man.basepoint, args.seed, n_random=k)


def _steps(args):
    if args.steps is None:
        return STEPS_PER_UNIT
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    return args.steps


def _header(args, name):
    return {
        "tool": {"name": "hololab", "version": __version__},
        "command": args.command if args.command != "forms" else f"forms {args.action}",
        "manifest": name,
        "seed": int(args.seed),
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_classify(args, watch):
    man = resolve_manifold(args.manifest)
    tol = args.tol
    steps = _steps(args)
    pts = _samples(man, args)
    eps = tuple(_floats(args.eps_schedule, "--eps-schedule")) if args.eps_schedule else DEFAULT_EPS_SCHEDULE
    rep = _header(args, man.name)
    rep["tolerances"] = {"rank": tol, "classify": tol, "steps_per_unit": steps, "eps_schedule": list(eps)}
    conn = man.connection
    bp = man.basepoint
    gamma = watch.run("christoffel", conn.gamma, bp[None])[0]
    stages = {"christoffel": {"basepoint": bp.tolist(), "max_abs": num(np.abs(gamma).max(), 0.0)}}
    if man.metric is not None:
        curv = watch.run("curvature", riemann, man.metric, bp)
        dec = decompose(curv.abstract())
        stages["curvature"] = {"norm": num(np.linalg.norm(curv.orthonormal()), 0.0),
                               "scalar": num(dec.s, tol)}
        stages["decomposition"] = _decomp_dict(dec, tol)
    else:
        omega = watch.run("curvature", conn.curvature, bp[None])[0]
        stages["curvature"] = {"norm": num(np.linalg.norm(omega), 0.0)}
    hols = {}
    if args.method in ("curvature-span", "both"):
        hols["curvature-span"] = watch.run("holonomy (curvature span)", curvature_span_algebra, conn, bp,
                                           samples=pts, tol=tol, seed=args.seed, steps_per_unit=steps)
    if args.method in ("loop", "both"):
        hols["loop"] = watch.run("holonomy (loops)", loop_holonomy_algebra, conn, bp, eps_schedule=eps, tol=tol,
                                 seed=args.seed, steps_per_unit=steps)
    stages["holonomy"] = {k: {"dim": num(h.dim, tol), "skew_defect": num(h.skew_defect(), 1e-6)}
                          for k, h in hols.items()}
    if len(hols) == 2:
        cmp_ = compare_algebras(hols["curvature-span"], hols["loop"])
        stages["holonomy"]["comparison"] = {"verdict": cmp_.verdict, "max_angle": num(cmp_.max_angle, 1e-3)}
    primary = hols.get("curvature-span", hols.get("loop"))
    report, _ = watch.run("classification", classify, man, tol=tol, points=pts, seed=args.seed, hol=primary)
    stages["classification"] = _classification_dict(report)
    rep["stages"] = stages
    return rep


def _decomp_dict(dec, tol):
    return {
        "scalar": num(dec.s, tol),
        "traceless_ricci_norm": num(np.linalg.norm(dec.r0), tol),
        "weyl_norm": num(dec.W.norm(), tol),
        "weyl_contraction": num(dec.weyl_contraction(), tol),
        "reconstruction_error": num(dec.reconstruction_error(), tol),
        "ricci": num(dec.ricci, tol),
    }


def _classification_dict(report):
    d = report.as_dict()
    return {
        "verdict": d["verdict"],
        "hol_dim": num(d["hol_dim"], 0.5),
        "symmetric": d["symmetric"],
        "split": d["split"],
        "invariants": d["invariants"],
        "evidence": [{"test": e["test"], "value": num(e["value"], e["threshold"])["value"],
                      "tol": _round(e["threshold"]), "passed": e["passed"]} for e in d["evidence"]],
        "notes": d["notes"],
    }


def _parse_loop(tokens):
    spec = {}
    for tok in tokens or []:
        if "=" not in tok:
            raise UsageError(f"--loop expects key=value pairs, got {tok!r}")
        key, val = tok.split("=", 1)
        spec[key.strip()] = val.strip()
    unknown = set(spec) - {"axes", "eps"}
    if unknown or "axes" not in spec or "eps" not in spec:
        raise UsageError("--loop needs exactly 'axes=i,j' and 'eps=<side>'")
    try:
        i, j = (int(t) for t in spec["axes"].split(","))
    except ValueError:
        raise UsageError("axes must be two 1-based integers 'i,j'") from None
    eps = _floats(spec["eps"], "eps")[0]
    return i, j, eps


def cmd_transport(args, watch):
    man = resolve_manifold(args.manifest)
    i, j, eps = _parse_loop(args.loop)
    n = man.dim
    if not (1 <= i <= n and 1 <= j <= n) or i == j:
        raise UsageError(f"axes must be two distinct indices in 1..{n}")
    if eps <= 0:
        raise UsageError("eps must be positive")
    steps = _steps(args)
    loop = loop_rectangle(man.chart, man.basepoint, i - 1, j - 1, eps)
    nsteps = max(4, int(np.ceil(steps * loop.length())))
    res = watch.run("transport", parallel_transport, man.connection, loop, np.eye(n), steps=nsteps)
    frame = basepoint_frame(man.connection, man.basepoint)
    g = np.linalg.solve(frame, res.matrix @ frame)
    err = max(res.error_estimate, 1e-12)
    dev = float(np.linalg.norm(g - np.eye(n), 2))
    eigs = np.linalg.eigvals(g)
    angles = sorted({_round(abs(np.angle(e))) for e in eigs if abs(np.angle(e)) > 10 * err})
    rep = _header(args, man.name)
    rep["tolerances"] = {"steps_per_unit": steps, "rk4_steps": nsteps}
    rep["stages"] = {"transport": {
        "axes": [i, j], "eps": eps, "basepoint": man.basepoint.tolist(), "area": num(eps * eps, 0.0),
        "holonomy": num(g, err),
        "deviation_from_identity": num(dev, err),
        "rotation_angles": num(angles, err),
        "error_estimate": num(res.error_estimate, 0.0),
    }}
    return rep


def cmd_decompose(args, watch):
    man = resolve_manifold(args.manifest)
    if man.metric is None:
        raise UsageError("decompose needs a metric (the manifest only gives a connection)")
    p = np.array(_floats(args.point, "--point")) if args.point else man.basepoint
    if p.shape != (man.dim,):
        raise UsageError(f"--point needs {man.dim} coordinates")
    man.chart.require(p)
    curv = watch.run("curvature", riemann, man.metric, p)
    dec = watch.run("decomposition", decompose, curv.abstract())
    rep = _header(args, man.name)
    rep["tolerances"] = {"decomposition": args.tol}
    out = _decomp_dict(dec, args.tol)
    out["point"] = p.tolist()
    parts = dec.orthogonality()
    out["orthogonality"] = num(max(abs(v) for v in parts.values()) if isinstance(parts, dict) else parts, args.tol)
    rep["stages"] = {"decomposition": out}
    return rep


def _form_of_degree(man, degree, dim, label, name=None):
    if man.dim != dim:
        raise UsageError(f"{label} check needs a {dim}-dimensional manifest (got {man.dim})")
    if name is not None:
        if name not in man.forms:
            raise UsageError(f"manifest has no form named {name!r}")
        f = man.forms[name]
        if f.degree != degree:
            raise UsageError(f"form {name!r} has degree {f.degree}, expected {degree}")
        return name, f
    cands = [(k, f) for k, f in sorted(man.forms.items()) if f.degree == degree]
    if len(cands) != 1:
        raise UsageError(f"{label} check needs exactly one {degree}-form in the manifest (found {len(cands)});"
                         " pick one with --form")
    return cands[0]


def cmd_forms(args, watch):
    man = resolve_manifold(args.manifest)
    tol = args.tol
    pts = _samples(man, args)
    bp = man.basepoint
    rep = _header(args, man.name)
    rep["tolerances"] = {"forms": tol}
    kind = args.type
    out = {"type": kind}
    if kind == "g2":
        name, phi = _form_of_degree(man, 3, 7, "G2", args.form)
        chk = watch.run("torsion", g2_torsion_check, phi, man.metric, pts)
        stab = watch.run("stabilizer", stabilizer, phi.value(bp), "gl", tol=1e-8)
        out.update(form=name, d_phi=num(chk["d_phi"], tol), dstar_phi=num(chk["dstar_phi"], tol),
                   stabilizer_dim=num(stab.dim, 0.5))
        ok = chk["d_phi"] < tol and chk["dstar_phi"] < tol and stab.dim == 14
    elif kind == "spin7":
        name, om = _form_of_degree(man, 4, 8, "Spin(7)", args.form)
        chk = watch.run("torsion", spin7_torsion_check, om, pts)
        o = om.value(bp)
        stab = watch.run("stabilizer", stabilizer, o, "so", tol=1e-8)
        dual = float(np.abs(form_hodge_star(o).coeffs - o.coeffs).max())
        out.update(form=name, d_Omega=num(chk["d_Omega"], tol), stabilizer_dim=num(stab.dim, 0.5),
                   self_duality_defect=num(dual, tol))
        ok = chk["d_Omega"] < tol and stab.dim == 21 and dual < tol
    elif kind == "hk":
        if man.dim % 4:
            raise UsageError("hyperkahler check needs dimension divisible by 4")
        two = sorted((k, f) for k, f in man.forms.items() if f.degree == 2)
        if len(two) != 3:
            raise UsageError(f"hk check needs exactly three 2-forms (found {len(two)})")
        vals = [f.value(bp) for _, f in two]
        rel = hk_relations(vals)
        d = max(float(np.abs(f.d().values(pts)).max()) if f.d().components else 0.0 for _, f in two)
        off = float(np.abs(rel - np.diag(np.diag(rel))).max())
        diag = np.diag(rel)
        spread = float(np.ptp(diag))
        out.update(forms=[k for k, _ in two], wedge_matrix=num(rel, tol), offdiagonal=num(off, tol),
                   diagonal_spread=num(spread, tol), d_omega=num(d, tol))
        ok = off < tol and spread < tol and d < tol and diag.min() > tol
    elif kind == "kahler":
        if man.metric is None or man.complex_structure is None:
            raise UsageError("kahler check needs a metric and a complex_structure")
        kr = watch.run("kahler", kahler_check, man.metric, man.complex_structure, pts)
        out.update({k: num(v, tol) for k, v in kr.as_dict().items()})
        ok = max(kr.as_dict().values()) < tol
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown form type {kind!r}")
    out["passed"] = bool(ok)
    rep["stages"] = {"forms": out}
    return rep


def cmd_homog(args, watch):
    split = resolve_split(args.manifest)
    tol = args.tol
    rep = _header(args, split.name or args.manifest)
    rep["tolerances"] = {"homog": tol}
    out = {"check": args.check, "dim_g": num(split.algebra.dim, 0.0), "dim_h": num(len(split.h), 0.0),
           "dim_m": num(len(split.m), 0.0), "inner_product_scale": num(split.scale, 0.0),
           "jacobi_defect": num(split.algebra.jacobi_defect(), 1e-10)}
    sym, defect = check_symmetric(split)
    if args.check == "symmetric":
        out.update(symmetric=sym, mm_defect=num(defect, 1e-12))
    elif args.check == "holonomy":
        if not sym:
            raise UsageError("holonomy from brackets needs a symmetric split ([m, m] in h)")
        hol = watch.run("holonomy", symmetric_holonomy, split)
        iso = isotropy_representation(split)
        iso_dim = span_of(iso, len(split.m)).dim if iso else 0
        out.update(hol_dim=num(hol.dim, 0.5), isotropy_dim=num(iso_dim, 0.5),
                   mm_spans_h=bool(hol.dim == iso_dim))
        if hol.dim:
            red = detect_reducible(hol, tol)
            out["verdict"] = red.label() if red is not None else berger_classify(hol, tol=tol).verdict
        else:
            out["verdict"] = "Trivial"
    else:
        t = canonical_torsion(split)
        out.update(torsion_norm=num(np.linalg.norm(t), 1e-12), symmetric=sym)
    rep["stages"] = {"homog": out}
    return rep


def cmd_catalog(args, watch):
    rows = [{"id": i, "dim": d, "description": s} for i, d, s in catalog_listing()]
    homog = [{"id": k, "name": HOMOGENEOUS_CATALOG[k]().name} for k in sorted(HOMOGENEOUS_CATALOG)]
    return {"tool": {"name": "hololab", "version": __version__}, "command": "catalog list",
            "manifolds": rows, "homogeneous": homog}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _seed(text):
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-6, help="rank / decision tolerance (default 1e-6)")
    common.add_argument("--steps", type=int, default=None,
                        help=f"RK4 steps per unit coordinate length (default {STEPS_PER_UNIT})")
    common.add_argument("--eps-schedule", default=None, help="loop sides, e.g. 0.2,0.1,0.05")
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED, help="sample-point seed (default 0x484F4C4F)")
    common.add_argument("--json", metavar="PATH", default=None, help="also write the report to PATH")
    common.add_argument("--points", type=int, default=None,
                        help=f"number of random sample points (default {N_RANDOM_SAMPLES})")
    common.add_argument("--timings", action="store_true", help="include wall-clock per stage (not deterministic)")

    p = argparse.ArgumentParser(prog="hololab", description="Holonomy and curvature toolkit for chart manifolds.")
    p.add_argument("--version", action="version", version=f"hololab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", parents=[common], help="full pipeline: holonomy, decomposition, Berger class")
    c.add_argument("manifest")
    c.add_argument("--method", choices=("curvature-span", "loop", "both"), default="curvature-span")

    t = sub.add_parser("transport", parents=[common], help="holonomy of a coordinate rectangle at the basepoint")
    t.add_argument("manifest")
    t.add_argument("--loop", nargs="+", required=True, metavar="KEY=VALUE", help="axes=i,j eps=<side> (1-based)")

    d = sub.add_parser("decompose", parents=[common], help="scalar / Ricci / Weyl split at a point")
    d.add_argument("manifest")
    d.add_argument("--point", default=None, help="comma-separated coordinates (default: basepoint)")

    f = sub.add_parser("forms", help="G-structure checks")
    fsub = f.add_subparsers(dest="action", required=True)
    fc = fsub.add_parser("check", parents=[common])
    fc.add_argument("manifest")
    fc.add_argument("--type", required=True, choices=("g2", "spin7", "hk", "kahler"))
    fc.add_argument("--form", default=None, help="name of the form in the manifest")

    h = sub.add_parser("homog", parents=[common], help="homogeneous-space checks from structure constants")
    h.add_argument("manifest", help="model id (see 'catalog list') or Lie-algebra manifest")
    h.add_argument("--check", required=True, choices=("symmetric", "holonomy", "torsion"))

    cat = sub.add_parser("catalog", help="list built-in manifolds and models")
    cat.add_argument("action", choices=("list",))
    cat.add_argument("--json", metavar="PATH", default=None)
    cat.add_argument("--timings", action="store_true")
    cat.set_defaults(seed=DEFAULT_SEED)
    return p


COMMANDS = {"classify": cmd_classify, "transport": cmd_transport, "decompose": cmd_decompose,
            "forms": cmd_forms, "homog": cmd_homog, "catalog": cmd_catalog}

VALIDATION_ERRORS = (UsageError, ManifestError, CatalogError, DomainError, DegenerateMetricError, ExprError,
                     HomogeneousError, FormError, CurvatureInputError, ClassificationError)
NUMERIC_ERRORS = (NumericFailure, HolonomyError, TransportError, np.linalg.LinAlgError, FloatingPointError)


def run(argv=None):
    """Parse ``argv`` and run the command; returns ``(exit_code, report_or_None, error_message, args)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_VALIDATION if exc.code else EXIT_OK), None, "", None
    watch = Stopwatch()
    try:
        report = COMMANDS[args.command](args, watch)
    except NUMERIC_ERRORS as exc:
        return EXIT_NUMERIC, None, f"numeric failure: {exc}", args
    except (ChartError, *VALIDATION_ERRORS) as exc:
        return EXIT_VALIDATION, None, f"error: {exc}", args
    if args.timings:
        report["timings"] = watch.stages
    return EXIT_OK, report, "", args


def main(argv=None):
    code, report, message, args = run(argv)
    if message:
        print(message, file=sys.stderr)
    if report is not None:
        text = dumps(report)
        sys.stdout.write(text)
        if getattr(args, "json", None):
            try:
                Path(args.json).write_text(text)
            except OSError as exc:
                print(f"error: cannot write {args.json}: {exc.strerror}", file=sys.stderr)
                return EXIT_VALIDATION
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
