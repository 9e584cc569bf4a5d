"""Where does a holonomy algebra sit: reducible, locally symmetric, or a
Berger class.

The pipeline is reducibility first, then the symmetric test, then the Berger
decision tree on the irreducible holonomy representation.  Every test records
``(name, value, threshold)`` evidence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import (MatrixAlgebraSpan, AlternatingForm, center, commutant, hodge_star, invariant_tensors,
                      orthonormal_rows, span_of, stabilizer)
from .chart import MetricField, nabla_R, orthonormal_frame, riemann, to_frame
from .holonomy import DEFAULT_SEED, HolonomyAlgebra, curvature_span_algebra, loop_holonomy_algebra, sample_points

DEFAULT_THRESHOLD = 1e-5


class ClassificationError(ValueError):
    pass


class ReducibleInputError(ClassificationError):
    pass


@dataclass(frozen=True)
class Evidence:
    test: str
    value: float
    threshold: float
    passed: bool

    def as_dict(self):
        return {"test": self.test, "value": float(self.value), "threshold": float(self.threshold),
                "passed": bool(self.passed)}


@dataclass
class ClassificationReport:
    verdict: str
    hol_dim: int
    n: int
    evidence: list = field(default_factory=list)
    invariants: dict = field(default_factory=dict)
    symmetric: bool | None = None
    split: list | None = None
    notes: list = field(default_factory=list)

    def add(self, test, value, threshold, passed=None):
        value = float(value)
        if not np.isfinite(value):
            raise ClassificationError(f"evidence {test} is not finite")
        passed = value < threshold if passed is None else passed
        self.evidence.append(Evidence(test, value, float(threshold), bool(passed)))
        return bool(passed)

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "hol_dim": self.hol_dim,
            "n": self.n,
            "symmetric": self.symmetric,
            "split": self.split,
            "invariants": {k: int(v) for k, v in self.invariants.items()},
            "evidence": [e.as_dict() for e in self.evidence],
            "notes": list(self.notes),
        }


def _span(hol) -> MatrixAlgebraSpan:
    return hol.span if isinstance(hol, HolonomyAlgebra) else hol


def _skew_defect(span):
    if span.dim == 0:
        return 0.0
    b = span.basis
    return float(np.abs(b + b.transpose(0, 2, 1)).max())


# ---------------------------------------------------------------------------
# Reducibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducibleSplit:
    dims: tuple
    bases: tuple  # orthonormal bases (rows) of the invariant subspaces
    projectors: tuple

    def label(self):
        return "Reducible(" + "+".join(str(d) for d in self.dims) + ")"


def detect_reducible(hol, tol=DEFAULT_THRESHOLD, seed=DEFAULT_SEED) -> ReducibleSplit | None:
    """Orthogonal invariant splitting from spectral projectors of a symmetric commutant element.

    Returns ``None`` when the only symmetric elements of the commutant are
    multiples of the identity.
    """
    span = _span(hol)
    n = span.ambient_dim
    comm = commutant(span, tol=1e-8)
    sym = 0.5 * (comm.basis + comm.basis.transpose(0, 2, 1)) if comm.dim else np.zeros((0, n, n))
    sym_span = span_of(list(sym), n, tol=1e-8, atol=1e-10) if len(sym) else span_of([], n)
    if sym_span.dim <= 1:
        return None
    rng = np.random.default_rng(seed)
    s = np.einsum("k,kij->ij", rng.standard_normal(sym_span.dim), sym_span.basis)
    s = 0.5 * (s + s.T)
    vals, vecs = np.linalg.eigh(s)
    scale = max(1.0, float(np.abs(vals).max()))
    groups = [[0]]
    for k in range(1, n):
        if vals[k] - vals[k - 1] > tol * scale:
            groups.append([k])
        else:
            groups[-1].append(k)
    if len(groups) == 1:
        return None
    bases = tuple(vecs[:, g].T for g in groups)
    projectors = tuple(b.T @ b for b in bases)
    order = sorted(range(len(bases)), key=lambda k: -len(groups[k]))
    return ReducibleSplit(tuple(len(groups[k]) for k in order), tuple(bases[k] for k in order),
                          tuple(projectors[k] for k in order))


# ---------------------------------------------------------------------------
# Local symmetry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetricVerdict:
    symmetric: bool
    max_nabla_r: float
    max_r: float
    threshold: float


def detect_symmetric(g: MetricField, points=None, tol=1e-6, seed=DEFAULT_SEED) -> SymmetricVerdict:
    """``nabla R = 0`` test: ``max |nabla R| < tol (1 + |R|)`` over the points (orthonormal-frame norms)."""
    if points is None:
        points = sample_points(g.chart, g.chart.center, seed)
    worst, rmax = 0.0, 0.0
    for p in np.atleast_2d(np.asarray(points, dtype=float)):
        frame = orthonormal_frame(g(p))
        dr = to_frame(nabla_R(g, p), frame)
        r = to_frame(riemann(g, p).components, frame)
        worst = max(worst, float(np.linalg.norm(dr)))
        rmax = max(rmax, float(np.linalg.norm(r)))
    threshold = tol * (1.0 + rmax)
    return SymmetricVerdict(worst < threshold, worst, rmax, threshold)


# ---------------------------------------------------------------------------
# Berger decision tree
# ---------------------------------------------------------------------------

def _form_matrix(form: AlternatingForm):
    return form.as_matrix()


def _quaternionic_triple(span, n, report, tol):
    comm = commutant(span, tol=1e-8)
    skew = 0.5 * (comm.basis - comm.basis.transpose(0, 2, 1)) if comm.dim else np.zeros((0, n, n))
    q = orthonormal_rows(skew.reshape(len(skew), -1), 1e-8, 1e-10) if len(skew) else np.zeros((0, n * n))
    report.invariants["commutant_skew"] = len(q)
    if len(q) != 3:
        return None
    js = q.reshape(3, n, n) * np.sqrt(n)
    square = max(float(np.abs(j @ j + np.eye(n)).max()) for j in js)
    anti = max(float(np.abs(js[a] @ js[b] + js[b] @ js[a]).max()) for a, b in ((0, 1), (0, 2), (1, 2)))
    ok = report.add("complex structures square to -1", square, tol)
    ok &= report.add("complex structures anticommute", anti, tol)
    return js if ok else None


def _complex_structure(span, n, report, tol):
    forms = invariant_tensors(span, 2, tol=1e-8)
    report.invariants["2-forms"] = len(forms)
    if len(forms) != 1 or n % 2:
        return None
    j = _form_matrix(forms[0])
    j = j / np.sqrt(np.abs(np.trace(j @ j)) / n)
    defect = float(np.abs(j @ j + np.eye(n)).max())
    if report.add("invariant 2-form squares to -1", defect, tol):
        return j
    return None


def berger_classify(hol, n=None, tol=DEFAULT_THRESHOLD, check_reducible=True) -> ClassificationReport:
    """Berger-list label of an irreducible skew holonomy algebra (``Undetermined`` when no branch fits)."""
    span = _span(hol)
    n = span.ambient_dim if n is None else n
    if n != span.ambient_dim:
        raise ClassificationError("n does not match the holonomy representation")
    report = ClassificationReport("Undetermined", span.dim, n)
    skew = _skew_defect(span)
    if not report.add("skew in orthonormal frame", skew, 1e-6):
        report.notes.append("holonomy is not contained in so(n); no Berger label applies")
        return report
    if check_reducible:
        split = detect_reducible(span, tol)
        if split is not None:
            raise ReducibleInputError(f"holonomy is reducible ({split.label()}); classify the factors")
    d = span.dim
    so_dim = n * (n - 1) // 2

    # SO(n)
    if report.add("dim hol - dim so(n)", abs(d - so_dim), 0.5):
        report.verdict = f"SO({n})"
        return report

    # Sp(m): three anticommuting parallel complex structures
    if n % 4 == 0:
        m = n // 4
        js = _quaternionic_triple(span, n, report, tol)
        if js is not None and report.add("dim hol - dim sp(m)", abs(d - m * (2 * m + 1)), 0.5):
            report.verdict = f"Sp({m})"
            return report

    # U(m) / SU(m): one invariant 2-form with J^2 = -1
    if n % 2 == 0:
        m = n // 2
        j = _complex_structure(span, n, report, tol)
        if j is not None:
            cen = center(span, tol=1e-8)
            report.invariants["center"] = cen.dim
            if cen.dim == 1:
                z = cen.basis[0]
                cos = abs(np.sum(z * j)) / (np.linalg.norm(z) * np.linalg.norm(j))
                if (report.add("center aligned with J (1 - |cos|)", 1.0 - cos, tol)
                        and report.add("dim hol - dim u(m)", abs(d - m * m), 0.5)):
                    report.verdict = f"U({m})"
                    return report
            elif cen.dim == 0:
                if report.add("dim hol - dim su(m)", abs(d - (m * m - 1)), 0.5):
                    report.verdict = f"SU({m})"
                    return report

    if n % 4 == 0 and n >= 8:
        m = n // 4
        if report.invariants.get("2-forms", len(invariant_tensors(span, 2, tol=1e-8))) == 0:
            forms4 = invariant_tensors(span, 4, tol=1e-8)
            report.invariants["4-forms"] = len(forms4)
            if len(forms4) == 1:
                stab = stabilizer(forms4[0] / forms4[0].norm(), "so", tol=1e-8)
                target = 2 * m * m + m + 3
                if (report.add("dim stab_so(Phi) - dim sp(m)sp(1)", abs(stab.dim - target), 0.5)
                        and report.add("hol in stab(Phi)", _containment(span, stab), tol)
                        and report.add("dim hol - dim sp(m)sp(1)", abs(d - target), 0.5)):
                    report.verdict = f"Sp({m})Sp(1)"
                    report.notes.append("quaternionic 4-form recognised by stabilizer dimension 2m^2+m+3")
                    return report

    if n == 7:
        forms3 = invariant_tensors(span, 3, tol=1e-8)
        report.invariants["3-forms"] = len(forms3)
        if len(forms3) == 1:
            stab = stabilizer(forms3[0] / forms3[0].norm(), "gl", tol=1e-8)
            if (report.add("dim stab_gl(phi) - 14", abs(stab.dim - 14), 0.5)
                    and report.add("hol in stab(phi)", _containment(span, stab), tol)
                    and report.add("dim hol - 14", abs(d - 14), 0.5)):
                report.verdict = "G2"
                return report

    if n == 8:
        forms4 = invariant_tensors(span, 4, tol=1e-8)
        report.invariants["4-forms"] = len(forms4)
        if len(forms4) == 1:
            om = forms4[0] / forms4[0].norm()
            dual = abs(float(np.dot(hodge_star(om).coeffs, om.coeffs)))
            stab = stabilizer(om, "so", tol=1e-8)
            if (report.add("self-duality defect (1 - |<*O,O>|)", 1.0 - dual, tol)
                    and report.add("dim stab_so(Omega) - 21", abs(stab.dim - 21), 0.5)
                    and report.add("hol in stab(Omega)", _containment(span, stab), tol)
                    and report.add("dim hol - 21", abs(d - 21), 0.5)):
                report.verdict = "Spin(7)"
                return report

    report.notes.append("no Berger branch matched")
    return report


def _containment(span, stab):
    if span.dim == 0:
        return 0.0
    return max(stab.residual(x) for x in span.basis)


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

def classify(manifold, method="curvature-span", tol=DEFAULT_THRESHOLD, points=None, seed=DEFAULT_SEED,
             eps_schedule=None, steps_per_unit=None, hol=None):
    """Run reducibility, symmetric and Berger tests on a catalog/manifest manifold.

    Returns ``(report, holonomy_algebra)``.
    """
    conn = manifold.connection
    kw = {}
    if steps_per_unit is not None:
        kw["steps_per_unit"] = steps_per_unit
    if hol is None:
        if method == "loop":
            if eps_schedule is not None:
                kw["eps_schedule"] = eps_schedule
            hol = loop_holonomy_algebra(conn, manifold.basepoint, seed=seed, **kw)
        elif method == "curvature-span":
            hol = curvature_span_algebra(conn, manifold.basepoint, samples=points, seed=seed, **kw)
        else:
            raise ClassificationError(f"unknown holonomy method {method!r}")
    n = conn.dim
    if manifold.metric is None:
        report = ClassificationReport("Undetermined", hol.dim, n)
        report.add("skew in basepoint frame", _skew_defect(hol.span), 1e-6)
        report.notes.append("connection is not metric; Berger's list does not apply")
        return report, hol
    split = detect_reducible(hol, tol, seed)
    sym = detect_symmetric(manifold.metric, points, seed=seed)
    if split is not None:
        report = ClassificationReport(split.label(), hol.dim, n, split=list(split.dims))
        report.add("invariant splitting found", 0.0, tol)
    else:
        report = berger_classify(hol, n, tol, check_reducible=False)
    report.symmetric = sym.symmetric
    report.add("max |nabla R| (symmetric test)", sym.max_nabla_r, sym.threshold, sym.symmetric)
    if report.verdict == "Undetermined" and sym.symmetric:
        report.verdict = "LocallySymmetric"
    return report, hol
