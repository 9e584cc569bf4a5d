"""Model forms of the special geometries, exterior calculus on chart fields and
torsion-free structure checks.

Orientation is always the coordinate orientation ``dx1 ^ ... ^ dxn``.
Form components use the determinant convention of :mod:`hololab.algebra`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from . import expr as E
from .algebra import (AlternatingForm, AlgebraInputError, MatrixAlgebraSpan, gl_basis, hodge_star, induced_action,
                      multi_indices, null_space, so_basis, span_of, stabilizer)
from .chart import Chart, MetricField, _Shift
from .expr import ZERO, as_expr, compile_exprs, differentiate

_STEP = 1e-20  # complex-step size for metric derivatives


class FormError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Model forms
# ---------------------------------------------------------------------------

def model_g2_form() -> AlternatingForm:
    """``phi_0 = dx123 + dx145 + dx167 + dx246 - dx257 - dx347 - dx356``."""
    return AlternatingForm.from_monomials(7, {
        (1, 2, 3): 1, (1, 4, 5): 1, (1, 6, 7): 1, (2, 4, 6): 1,
        (2, 5, 7): -1, (3, 4, 7): -1, (3, 5, 6): -1,
    })


def model_spin7_form() -> AlternatingForm:
    """The self-dual Cayley 4-form ``Omega_0`` on ``R^8`` (14 monomials)."""
    return AlternatingForm.from_monomials(8, {
        (1, 2, 3, 4): 1, (1, 2, 5, 6): 1, (1, 2, 7, 8): 1, (1, 3, 5, 7): 1,
        (1, 3, 6, 8): -1, (1, 4, 5, 8): -1, (1, 4, 6, 7): -1,
        (2, 3, 5, 8): -1, (2, 3, 6, 7): -1, (2, 4, 5, 7): -1,
        (2, 4, 6, 8): 1, (3, 4, 5, 6): 1, (3, 4, 7, 8): 1, (5, 6, 7, 8): 1,
    })


HK_VARIANTS = ("all-plus", "omega3-flipped", "quaternionic")


def model_hk_forms(m: int, variant: str = "all-plus"):
    """Three 2-forms on ``R^{4m}`` with ``x^p_l`` at (1-based) index ``4(l - 1) + p + 1``.

    ``all-plus``: ``dx0^dx1 + dx2^dx3``, ``dx0^dx2 + dx1^dx3``, ``dx0^dx3 + dx1^dx2``.
    ``omega3-flipped``: the third form becomes ``dx0^dx3 - dx1^dx2``.
    ``quaternionic``: the second form becomes ``dx0^dx2 - dx1^dx3``; this is the
    triple of left multiplication by ``i, j, k`` (all three self-dual for m = 1).
    """
    if m < 1:
        raise FormError("m must be >= 1")
    if variant not in HK_VARIANTS:
        raise FormError(f"unknown variant {variant!r}; choose from {HK_VARIANTS}")
    s2 = -1.0 if variant == "quaternionic" else 1.0
    s3 = -1.0 if variant == "omega3-flipped" else 1.0
    n = 4 * m
    terms = [{}, {}, {}]
    for l in range(m):
        b = 4 * l + 1
        terms[0].update({(b, b + 1): 1.0, (b + 2, b + 3): 1.0})
        terms[1].update({(b, b + 2): 1.0, (b + 1, b + 3): s2})
        terms[2].update({(b, b + 3): 1.0, (b + 1, b + 2): s3})
    return tuple(AlternatingForm.from_monomials(n, t) for t in terms)


def qk_4form(w1, w2, w3) -> AlternatingForm:
    """``w1^w1 + w2^w2 + w3^w3``."""
    forms = (w1, w2, w3)
    if any(f.degree != 2 for f in forms) or len({f.dim for f in forms}) != 1:
        raise FormError("qk_4form needs three 2-forms on the same space")
    return w1.wedge(w1) + w2.wedge(w2) + w3.wedge(w3)


def hk_relations(forms):
    """Matrix ``M[i, j]`` with ``w_i ^ w_j = M[i, j] vol`` (only for 4-dimensional forms)
    or, in general, the coefficient norms of ``w_i ^ w_j``."""
    n = forms[0].dim
    out = np.zeros((len(forms), len(forms)))
    for i, j in itertools.product(range(len(forms)), repeat=2):
        w = forms[i].wedge(forms[j])
        out[i, j] = w.coeffs[0] if n == 4 else w.norm()
    return out


def standard_symplectic(m: int) -> AlternatingForm:
    """``sum dx_{2l-1} ^ dx_{2l}`` on ``R^{2m}``."""
    return AlternatingForm.from_monomials(2 * m, {(2 * l + 1, 2 * l + 2): 1.0 for l in range(m)})


def stabilizer_algebra(form: AlternatingForm, ambient: str = "gl", tol=1e-8) -> MatrixAlgebraSpan:
    """Null space of ``X -> X.T`` in ``gl(n)`` or ``so(n)``."""
    try:
        return stabilizer(form, ambient, tol)
    except AlgebraInputError as exc:
        raise FormError(str(exc)) from exc


def common_stabilizer(forms, ambient: str = "so", tol=1e-8) -> MatrixAlgebraSpan:
    """Matrices annihilating every form in ``forms`` (e.g. the ``sp(m)`` of a hyperkahler triple)."""
    forms = list(forms)
    if not forms or len({f.dim for f in forms}) != 1:
        raise FormError("common_stabilizer needs forms on the same space")
    n = forms[0].dim
    if ambient not in ("gl", "so"):
        raise FormError(f"unknown ambient algebra {ambient!r}")
    basis = np.array(gl_basis(n) if ambient == "gl" else so_basis(n))
    cols = np.vstack([np.array([f.act(x).coeffs for x in basis]).T for f in forms])
    coeffs = null_space(cols, tol)
    elems = np.einsum("ka,aij->kij", coeffs, basis) if coeffs.size else []
    return span_of(list(elems), n, tol, closed=True)


# ---------------------------------------------------------------------------
# Representation splittings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FormPiece:
    dim: int
    basis: np.ndarray  # orthonormal rows in the Lambda^k coefficient basis
    star_sign: int     # +1 / -1 for Hodge eigenspaces when k = n/2, else 0


def _cluster(vals, tol):
    scale = max(1.0, float(np.abs(vals).max()))
    groups = [[0]]
    for k in range(1, len(vals)):
        if vals[k] - vals[k - 1] > tol * scale:
            groups.append([k])
        else:
            groups[-1].append(k)
    return groups


def _commutant_split(mats, basis, rng, tol):
    """Split ``span(basis)`` with a random symmetric element of the commutant of the restricted action."""
    d = basis.shape[0]
    if d <= 1:
        return [basis]
    restricted = [basis @ m @ basis.T for m in mats]
    eye = np.eye(d)
    normal = np.zeros((d * d, d * d))
    for r in restricted:
        k = np.kron(r, eye) - np.kron(eye, r.T)  # vec_row(r C - C r)
        normal += k.T @ k
    vals, vecs = np.linalg.eigh(normal)
    scale = max(1.0, float(vals.max()))
    kernel = vecs[:, vals < tol * scale]
    if kernel.shape[1] <= 1:
        return [basis]
    c = (kernel @ rng.standard_normal(kernel.shape[1])).reshape(d, d)
    c = 0.5 * (c + c.T)
    ev, evec = np.linalg.eigh(c)
    return [evec[:, g].T @ basis for g in _cluster(ev, 1e-6)]


def form_splitting(stab: MatrixAlgebraSpan, k: int, seed=0, tol=1e-9):
    """Decompose ``Lambda^k`` under ``stab`` into invariant pieces.

    Steps: Hodge-star eigenspaces when ``k = n/2`` (and ``** = +1``), then
    Casimir eigenspaces, then spectral projectors of a random symmetric element
    of the commutant of the induced action inside each piece.
    """
    n = stab.ambient_dim
    size = comb(n, k)
    mats = [induced_action(x, k) for x in stab.basis]
    rng = np.random.default_rng(seed)
    pieces = [(np.eye(size), 0)]
    if 2 * k == n and (k * (n - k)) % 2 == 0:
        star = np.array([hodge_star(AlternatingForm(n, k, e)).coeffs for e in np.eye(size)]).T
        sym = 0.5 * (star + star.T)
        vals, vecs = np.linalg.eigh(sym)
        pieces = [(vecs[:, vals < 0].T, -1), (vecs[:, vals > 0].T, 1)]
    out = []
    for basis, sign in pieces:
        if basis.shape[0] == 0:
            continue
        subs = [basis]
        if mats:
            cas = -sum(basis @ m @ m @ basis.T for m in mats)
            cas = 0.5 * (cas + cas.T)
            commutes = max(float(np.abs(cas @ (basis @ m @ basis.T) - (basis @ m @ basis.T) @ cas).max())
                           for m in mats) < 1e-8 * max(1.0, float(np.abs(cas).max()))
            if commutes:
                ev, evec = np.linalg.eigh(cas)
                subs = [evec[:, g].T @ basis for g in _cluster(ev, 1e-7)]
        for sub in subs:
            parts = _commutant_split(mats, sub, rng, tol) if mats else [sub[i:i + 1] for i in range(len(sub))]
            out.extend(FormPiece(p.shape[0], p, sign) for p in parts)
    out.sort(key=lambda p: (p.dim, p.star_sign))
    return out


def form_splitting_dims(stab: MatrixAlgebraSpan, k: int, seed=0):
    """Sorted dimensions of the invariant pieces of ``Lambda^k`` (they sum to ``C(n, k)``)."""
    return [p.dim for p in form_splitting(stab, k, seed)]


# ---------------------------------------------------------------------------
# Form fields
# ---------------------------------------------------------------------------

def _sorted_with_sign(idx):
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return None, 0
    sign = 1
    for a in range(len(idx)):
        for b in range(len(idx) - 1 - a):
            if idx[b] > idx[b + 1]:
                idx[b], idx[b + 1] = idx[b + 1], idx[b]
                sign = -sign
    return tuple(idx), sign


class FormField:
    """A k-form field ``sum_I f_I(x) dx_I`` with expression coefficients (0-based indices)."""

    def __init__(self, chart: Chart, degree: int, components=None):
        if not 0 <= degree <= chart.dim:
            raise FormError(f"degree {degree} not in [0, {chart.dim}]")
        self.chart = chart
        self.degree = degree
        comps = {}
        for idx, e in (components or {}).items():
            key, sign = _sorted_with_sign(idx)
            if len(idx) != degree or any(not 0 <= i < chart.dim for i in idx):
                raise FormError(f"bad multi-index {idx} for a {degree}-form in dimension {chart.dim}")
            if key is None:
                continue
            e = chart.parse(e) if isinstance(e, str) else as_expr(e)
            e = e if sign > 0 else E.neg(e)
            comps[key] = E.add(comps.get(key, ZERO), e)
        self.components = {k: v for k, v in comps.items() if v is not ZERO}
        self._fn = None

    @property
    def dim(self):
        return self.chart.dim

    @classmethod
    def constant(cls, chart, form: AlternatingForm):
        if form.dim != chart.dim:
            raise FormError("form and chart dimensions differ")
        return cls(chart, form.degree, {idx: float(c) for idx, c in
                                        zip(multi_indices(form.dim, form.degree), form.coeffs) if c != 0})

    @classmethod
    def sparse(cls, chart, degree, entries, one_based=True):
        """From ``[(indices, expr), ...]``; unsorted indices pick up the permutation sign."""
        off = 1 if one_based else 0
        comps = {}
        for idx, e in entries:
            key = tuple(int(i) - off for i in idx)
            e = chart.parse(e) if isinstance(e, str) else as_expr(e)
            if key in comps:
                comps[key] = E.add(comps[key], e)
            else:
                comps[key] = e
        return cls(chart, degree, comps)

    # evaluation -------------------------------------------------------
    def values(self, points):
        """Coefficient vectors at each point: shape ``(L, C(n, k))``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = multi_indices(self.dim, self.degree)
        out = np.zeros((pts.shape[0], len(idx)))
        if not self.components:
            return out
        keys = list(self.components)
        if self._fn is None:
            self._fn = compile_exprs([self.components[k] for k in keys])
        vals = self._fn(pts.T)
        pos = {ix: p for p, ix in enumerate(idx)}
        for r, key in enumerate(keys):
            out[:, pos[key]] = vals[r]
        return out

    def value(self, p) -> AlternatingForm:
        return AlternatingForm(self.dim, self.degree, self.values(p)[0])

    # algebra ----------------------------------------------------------
    def _combine(self, other, op):
        if other.chart.dim != self.dim or other.degree != self.degree:
            raise FormError("forms differ in dimension or degree")
        comps = dict(self.components)
        for k, v in other.components.items():
            comps[k] = op(comps.get(k, ZERO), v)
        return FormField(self.chart, self.degree, comps)

    def __add__(self, other):
        return self._combine(other, E.add)

    def __sub__(self, other):
        return self._combine(other, E.sub)

    def scale(self, c):
        c = as_expr(c)
        return FormField(self.chart, self.degree, {k: E.mul(c, v) for k, v in self.components.items()})

    def wedge(self, other: "FormField") -> "FormField":
        if other.dim != self.dim:
            raise FormError("wedge of fields on different charts")
        if self.degree + other.degree > self.dim:
            raise FormError("wedge degree exceeds the dimension")
        comps = {}
        for (i, f), (j, h) in itertools.product(self.components.items(), other.components.items()):
            key, sign = _sorted_with_sign(i + j)
            if key is None:
                continue
            term = E.mul(f, h)
            term = term if sign > 0 else E.neg(term)
            comps[key] = E.add(comps.get(key, ZERO), term)
        return FormField(self.chart, self.degree + other.degree, comps)

    __xor__ = wedge

    def d(self) -> "FormField":
        """Exterior derivative, computed symbolically."""
        if self.degree == self.dim:
            return FormField(self.chart, self.degree, {})  # top degree: d = 0 (no (n+1)-forms)
        comps = {}
        for idx, f in self.components.items():
            for a in sorted(f.variables()):
                if a in idx:
                    continue
                key, sign = _sorted_with_sign((a,) + idx)
                df = differentiate(f, a)
                df = df if sign > 0 else E.neg(df)
                comps[key] = E.add(comps.get(key, ZERO), df)
        return FormField(self.chart, self.degree + 1, comps)

    def embed(self, chart: Chart, offset: int) -> "FormField":
        """Pull back along the projection ``chart -> self.chart`` onto coordinates ``offset..``."""
        shift = _Shift(offset)
        return FormField(chart, self.degree, {tuple(i + offset for i in k): shift(v)
                                              for k, v in self.components.items()})

    def __repr__(self):
        return f"FormField(dim={self.dim}, degree={self.degree}, terms={len(self.components)})"


def _metric_at(g, p):
    if g is None:
        return None
    return g(p)


def exterior_derivative(f: FormField, p) -> AlternatingForm:
    p = np.asarray(p, dtype=float)
    f.chart.require(p)
    if f.degree == f.dim:
        raise FormError("the exterior derivative of a top-degree form is zero-dimensional")
    return f.d().value(p)


def form_hodge_star(f, g: MetricField | None = None, p=None, orientation=1) -> AlternatingForm:
    """Hodge star of a field at ``p`` (or of a constant form)."""
    if isinstance(f, FormField):
        p = np.asarray(p, dtype=float)
        return hodge_star(f.value(p), _metric_at(g, p), orientation)
    gm = None if g is None else (g(p) if isinstance(g, MetricField) else np.asarray(g, dtype=float))
    return hodge_star(f, gm, orientation)


def _star_derivatives(f: FormField, g: MetricField | None, p):
    """``d_a (*f)`` at ``p`` for every coordinate ``a``; shape ``(n, C(n, n-k))``."""
    n, k = f.dim, f.degree
    beta = f.value(p)
    grads = []
    comps = list(f.components.items())
    idx = multi_indices(n, k)
    pos = {ix: q for q, ix in enumerate(idx)}
    if comps:
        fn = compile_exprs([differentiate(e, a) for a in range(n) for _, e in comps])
        dv = fn(np.asarray(p, dtype=float)).reshape(n, len(comps))
    else:
        dv = np.zeros((n, 0))
    if g is None:
        gp, dg = None, None
    else:
        gj = g.jet(p, 1)
        gp, dg = gj[0][0], gj[1][0]
    for a in range(n):
        da = np.zeros(len(idx))
        for r, (key, _) in enumerate(comps):
            da[pos[key]] = dv[a, r]
        term = hodge_star(AlternatingForm(n, k, da), gp).coeffs
        if gp is not None:
            moved = hodge_star(beta, gp + 1j * _STEP * dg[a]).coeffs
            term = term + np.imag(moved) / _STEP
        grads.append(np.real(term))
    return np.array(grads)


def coderivative(f: FormField, g: MetricField | None = None, p=None) -> AlternatingForm:
    """``d* f = (-1)^{kn + n + 1} * d (* f)`` at ``p``."""
    p = np.asarray(p, dtype=float)
    f.chart.require(p)
    n, k = f.dim, f.degree
    if k == 0:
        raise FormError("the coderivative of a function is zero-dimensional")
    grads = _star_derivatives(f, g, p)
    d_star = np.zeros(comb(n, n - k + 1))
    deg = n - k
    for a in range(n):
        dxa = AlternatingForm(n, 1, np.eye(n)[a])
        d_star += dxa.wedge(AlternatingForm(n, deg, grads[a])).coeffs
    sign = (-1) ** (k * n + n + 1)
    gp = _metric_at(g, p)
    return hodge_star(AlternatingForm(n, deg + 1, d_star), gp) * sign


def laplacian(f: FormField, g: MetricField | None = None, p=None, h=1e-4) -> AlternatingForm:
    """``(d d* + d* d) f`` at ``p``.

    The ``d* d`` term is exact; the ``d d*`` term (absent for functions)
    differentiates the coderivative by fourth-order central differences.
    """
    p = np.asarray(p, dtype=float)
    n, k = f.dim, f.degree
    total = np.zeros(comb(n, k))
    if k < n:
        total += coderivative(f.d(), g, p).coeffs
    if k > 0:
        grads = []
        for a in range(n):
            e = np.eye(n)[a] * h
            vals = [coderivative(f, g, p + s * e).coeffs for s in (-2, -1, 1, 2)]
            grads.append((vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h))
        for a in range(n):
            dxa = AlternatingForm(n, 1, np.eye(n)[a])
            total += dxa.wedge(AlternatingForm(n, k - 1, grads[a])).coeffs
    return AlternatingForm(n, k, total)


# ---------------------------------------------------------------------------
# Almost complex structures
# ---------------------------------------------------------------------------

class AlmostComplexField:
    """Endomorphism field ``J[i, j] = J^i_j`` (column j is the image of ``d/dx_j``)."""

    def __init__(self, chart: Chart, components, check=True):
        n = chart.dim
        if n % 2:
            raise FormError("an almost complex structure needs even dimension")
        arr = np.asarray(components, dtype=object)
        if arr.shape != (n, n):
            raise FormError("J must be an n x n array")
        self.chart = chart
        self.components = [[chart.parse(v) if isinstance(v, str) else as_expr(v) for v in row] for row in arr]
        flat = [e for row in self.components for e in row]
        self._fn = compile_exprs(flat)
        self._dfn = compile_exprs([differentiate(e, a) for a in range(n) for e in flat])
        if check:
            for p in chart.grid(3, 200):
                j = self(p)
                if np.abs(j @ j + np.eye(n)).max() > 1e-10:
                    raise FormError(f"J^2 != -1 at {p.tolist()}")

    @property
    def dim(self):
        return self.chart.dim

    def __call__(self, p):
        n = self.dim
        return self._fn(np.asarray(p, dtype=float)).reshape(n, n)

    def jacobian(self, p):
        """``dJ[a, i, j] = d_a J^i_j``."""
        n = self.dim
        return self._dfn(np.asarray(p, dtype=float)).reshape(n, n, n)


def nijenhuis(jf: AlmostComplexField, p) -> np.ndarray:
    """``N[i, j, k]`` = components of ``1/4([JX,JY] - J[JX,Y] - J[X,JY] - [X,Y])`` on coordinate fields."""
    p = np.asarray(p, dtype=float)
    jf.chart.require(p)
    j = jf(p)
    dj = jf.jacobian(p)
    t = (np.einsum("aj,aik->ijk", j, dj) - np.einsum("ak,aij->ijk", j, dj)
         + np.einsum("ic,kcj->ijk", j, dj) - np.einsum("ic,jck->ijk", j, dj))
    return 0.25 * t


def kahler_form_field(g: MetricField, jf: AlmostComplexField) -> FormField:
    """``omega(X, Y) = g(JX, Y)``, i.e. ``omega_ij = J^a_i g_aj``."""
    n = g.dim
    comps = {}
    for i in range(n):
        for jj in range(i + 1, n):
            terms = [E.mul(jf.components[a][i], g.components[a][jj]) for a in range(n)]
            e = ZERO
            for t in terms:
                e = E.add(e, t)
            comps[(i, jj)] = e
    return FormField(g.chart, 2, comps)


@dataclass(frozen=True)
class KahlerReport:
    hermitian_defect: float
    d_omega: float
    nijenhuis: float
    j_squared: float

    def as_dict(self):
        return {"hermitian": self.hermitian_defect, "d_omega": self.d_omega,
                "nijenhuis": self.nijenhuis, "j_squared": self.j_squared}


def kahler_check(g: MetricField, jf, points=None) -> KahlerReport:
    """Sup over ``points`` of ``|J^T g J - g|``, ``|d omega|``, ``|N_J|`` and ``|J^2 + 1|``."""
    if g.dim % 2:
        raise FormError("Kahler check needs even dimension")
    if not isinstance(jf, AlmostComplexField):
        jf = AlmostComplexField(g.chart, jf)
    if points is None:
        from .holonomy import sample_points

        points = sample_points(g.chart, g.chart.center)
    omega = kahler_form_field(g, jf)
    domega = omega.d()
    herm = dw = nij = jsq = 0.0
    for p in np.atleast_2d(np.asarray(points, dtype=float)):
        gp, jp = g(p), jf(p)
        herm = max(herm, float(np.abs(jp.T @ gp @ jp - gp).max()))
        jsq = max(jsq, float(np.abs(jp @ jp + np.eye(g.dim)).max()))
        dw = max(dw, float(np.abs(domega.values(p)).max()) if domega.components else 0.0)
        nij = max(nij, float(np.abs(nijenhuis(jf, p)).max()))
    return KahlerReport(herm, dw, nij, jsq)


# ---------------------------------------------------------------------------
# Torsion-free G2 / Spin(7)
# ---------------------------------------------------------------------------

def _sup(values):
    return float(max((np.abs(v).max() if np.size(v) else 0.0) for v in values)) if values else 0.0


def g2_torsion_check(phi: FormField, g: MetricField | None = None, points=None):
    """``{"d_phi": sup |d phi|, "dstar_phi": sup |d* phi|}`` over sample points."""
    if phi.dim != 7 or phi.degree != 3:
        raise FormError("G2 check needs a 3-form on a 7-dimensional chart")
    if points is None:
        from .holonomy import sample_points

        points = sample_points(phi.chart, phi.chart.center)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dphi = phi.d()
    d_vals = [dphi.values(p) for p in pts]
    s_vals = [coderivative(phi, g, p).coeffs for p in pts]
    return {"d_phi": _sup(d_vals), "dstar_phi": _sup(s_vals)}


def spin7_torsion_check(omega: FormField, points=None):
    """``{"d_Omega": sup |d Omega|}`` over sample points."""
    if omega.dim != 8 or omega.degree != 4:
        raise FormError("Spin(7) check needs a 4-form on an 8-dimensional chart")
    if points is None:
        from .holonomy import sample_points

        points = sample_points(omega.chart, omega.chart.center)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dom = omega.d()
    return {"d_Omega": _sup([dom.values(p) for p in pts])}


# ---------------------------------------------------------------------------
# Constructions from Calabi-Yau data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CYData:
    """Kahler form and real/imaginary parts of the holomorphic volume form on a chart."""

    chart: Chart
    omega: FormField
    theta_re: FormField
    theta_im: FormField


def flat_cy(m: int) -> CYData:
    """Flat ``C^m`` with ``z_j = x_{2j-1} + i x_{2j}``: ``omega = sum dx_{2j-1} ^ dx_{2j}``, ``theta = dz_1 ^ ... ^ dz_m``."""
    n = 2 * m
    chart = Chart.box(n)
    omega = FormField.constant(chart, standard_symplectic(m))
    # expand dz_1 ^ ... ^ dz_m, dz_j = dx_{2j} + i dx_{2j+1} (0-based)
    re, im = {}, {}
    for choice in itertools.product((0, 1), repeat=m):
        idx = tuple(2 * j + c for j, c in enumerate(choice))
        power = sum(choice) % 4  # i^power
        val = {0: 1.0, 1: 1j, 2: -1.0, 3: -1j}[power]
        if val.real:
            re[idx] = val.real
        if val.imag:
            im[idx] = val.imag
    return CYData(chart, omega, FormField(chart, m, re), FormField(chart, m, im))


def _product_chart(k, base: Chart):
    flat = Chart.box(k)
    return Chart(k + base.dim, flat.lo + base.lo, flat.hi + base.hi,
                 tuple(f"t{i + 1}" for i in range(k)) + tuple(base.names))


def _flat_form(chart, terms):
    return FormField(chart, len(next(iter(terms))), {tuple(i - 1 for i in k): v for k, v in terms.items()})


def spin7_from_cy2(cy: CYData) -> FormField:
    """``dx1234 + (dx12 + dx34)^w + (dx13 - dx24)^Re th - (dx14 + dx23)^Im th + 1/2 w^w`` on ``R^4 x M``."""
    if cy.chart.dim != 4:
        raise FormError("needs a Calabi-Yau 2-fold chart")
    chart = _product_chart(4, cy.chart)
    w, tr, ti = (f.embed(chart, 4) for f in (cy.omega, cy.theta_re, cy.theta_im))
    vol = _flat_form(chart, {(1, 2, 3, 4): 1.0})
    a = _flat_form(chart, {(1, 2): 1.0, (3, 4): 1.0})
    b = _flat_form(chart, {(1, 3): 1.0, (2, 4): -1.0})
    c = _flat_form(chart, {(1, 4): 1.0, (2, 3): 1.0})
    return vol + a.wedge(w) + b.wedge(tr) - c.wedge(ti) + w.wedge(w).scale(0.5)


def g2_from_cy3(cy: CYData) -> FormField:
    """``dx ^ omega + Re(theta)`` on ``R x M``."""
    if cy.chart.dim != 6:
        raise FormError("needs a Calabi-Yau 3-fold chart")
    chart = _product_chart(1, cy.chart)
    w, tr = cy.omega.embed(chart, 1), cy.theta_re.embed(chart, 1)
    dx = _flat_form(chart, {(1,): 1.0})
    return dx.wedge(w) + tr


# ---------------------------------------------------------------------------
# Ricci form of a Hermitian metric
# ---------------------------------------------------------------------------

def _complex_det(re, im):
    """Symbolic determinant of ``re + i im`` (Leibniz expansion); returns (Re det, Im det)."""
    m = len(re)
    dre, dim_ = ZERO, ZERO
    for perm in itertools.permutations(range(m)):
        sign = 1
        for a in range(m):
            for b in range(a + 1, m):
                if perm[a] > perm[b]:
                    sign = -sign
        pr, pi = E.num(1.0), ZERO
        for row, col in enumerate(perm):
            ar, ai = re[row][col], im[row][col]
            pr, pi = E.sub(E.mul(pr, ar), E.mul(pi, ai)), E.add(E.mul(pr, ai), E.mul(pi, ar))
        if sign > 0:
            dre, dim_ = E.add(dre, pr), E.add(dim_, pi)
        else:
            dre, dim_ = E.sub(dre, pr), E.sub(dim_, pi)
    return dre, dim_


def kahler_ricci(chart: Chart, h_re, h_im, p) -> np.ndarray:
    """``Ric_{k l} = -d^2 log det h / dz_k dz_l-bar`` at ``p`` (complex ``m x m``).

    ``h = h_re + i h_im`` is given in real coordinates ordered ``x1, y1, x2, y2, ...``.
    """
    m = len(h_re)
    if chart.dim != 2 * m:
        raise FormError("chart must have real dimension 2m")
    re = [[chart.parse(v) if isinstance(v, str) else as_expr(v) for v in row] for row in h_re]
    im = [[chart.parse(v) if isinstance(v, str) else as_expr(v) for v in row] for row in h_im]
    det_re, _ = _complex_det(re, im)
    p = np.asarray(p, dtype=float)
    if det_re.evaluate(p) <= 0:
        raise FormError("hermitian metric is singular or indefinite at p")
    logdet = E.func("log", det_re)
    out = np.zeros((m, m), dtype=complex)
    for k in range(m):
        for l in range(m):
            xk, yk, xl, yl = 2 * k, 2 * k + 1, 2 * l, 2 * l + 1
            d2 = lambda a, b: differentiate(differentiate(logdet, a), b).evaluate(p)
            real = d2(xk, xl) + d2(yk, yl)
            imag = d2(xk, yl) - d2(yk, xl)
            out[k, l] = -0.25 * (real + 1j * imag)
    return out
