"""Metric and connection fields on a single coordinate chart.

Index conventions (0-based everywhere in the API):

* ``gamma[k, i, j]`` is the Christoffel symbol with upper index ``k``; the
  connection matrix along ``d/dx^i`` is ``A_i = gamma[:, i, :]`` and parallel
  transport solves ``f' + A(c') f = 0``.
* ``curvature_of_connection`` returns ``omega[i, j] = dA_j/dx^i - dA_i/dx^j + [A_i, A_j]``,
  the endomorphism ``R(d_i, d_j) = [nabla_i, nabla_j]``.
* ``riemann`` returns ``R[i, j, k, l] = g(R(d_i, d_j) d_l, d_k)``.  With the
  2-form/matrix identification of :mod:`hololab.algebra` the curvature operator
  on 2-forms is then the identity on the unit round sphere, so sectional
  curvature ``R[i, j, i, j] / (g_ii g_jj - g_ij^2)`` is ``+1`` there and the
  scalar curvature of the round 2-sphere is ``+2``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .expr import ZERO, Expression, as_expr, compile_exprs, differentiate, parse


class ChartError(ValueError):
    pass


class DomainError(ChartError):
    pass


class DegenerateMetricError(ChartError):
    pass


@dataclass(frozen=True)
class Chart:
    """An axis-aligned open coordinate box."""

    dim: int
    lo: tuple
    hi: tuple
    names: tuple = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ChartError("chart dimension must be >= 1")
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != self.dim or len(hi) != self.dim:
            raise ChartError("domain box does not match the chart dimension")
        for a, b in zip(lo, hi):
            if not a < b:
                raise ChartError(f"empty domain interval ({a}, {b})")
        names = tuple(self.names) or tuple(f"x{i + 1}" for i in range(self.dim))
        if len(names) != self.dim:
            raise ChartError("wrong number of coordinate names")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "names", names)

    @classmethod
    def box(cls, dim, lo=-1.0, hi=1.0, names=()):
        return cls(dim, (lo,) * dim, (hi,) * dim, names)

    @property
    def center(self):
        return 0.5 * (np.array(self.lo) + np.array(self.hi))

    @property
    def half_width(self):
        return 0.5 * (np.array(self.hi) - np.array(self.lo))

    @property
    def aliases(self):
        return {name: i for i, name in enumerate(self.names)}

    def contains(self, point, margin=0.0) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p > np.array(self.lo) + margin) and np.all(p < np.array(self.hi) - margin))

    def require(self, point):
        if not self.contains(point):
            raise DomainError(f"point {np.asarray(point).tolist()} is outside the chart domain")

    def grid(self, per_axis=5, cap=10_000):
        per_axis = max(1, min(per_axis, int(np.floor(cap ** (1.0 / self.dim) + 1e-9))))
        axes = [lo + (np.arange(per_axis) + 0.5) / per_axis * (hi - lo)
                for lo, hi in zip(self.lo, self.hi)]
        return np.array(list(itertools.product(*axes)))

    def parse(self, text):
        return parse(text, aliases=self.aliases, dim=self.dim)


def _as_expr_in(chart, value):
    if isinstance(value, str):
        return chart.parse(value)
    return as_expr(value)


# ---------------------------------------------------------------------------
# Metric fields
# ---------------------------------------------------------------------------

class MetricField:
    """Riemannian metric components ``g_ij`` given as expressions or a callable ``p -> (n, n) array``.

    Derivatives are symbolic for expression components; callables fall back to
    central differences with step ``1e-5 * (1 + |x|)``.
    """

    def __init__(self, chart: Chart, components=None, *, function=None, check=True):
        self.chart = chart
        n = chart.dim
        self.function = function
        if function is None:
            comps = [[_as_expr_in(chart, components[i][j]) for j in range(n)] for i in range(n)]
            if len(components) != n or any(len(r) != n for r in components):
                raise ChartError("metric must be an n x n array of expressions")
            for i in range(n):
                for j in range(i + 1, n):
                    if comps[i][j] is not comps[j][i]:
                        a, b = comps[i][j], comps[j][i]
                        probe = chart.grid(3, 200)
                        fa = compile_exprs([a, b])(probe.T)
                        if not np.allclose(fa[0], fa[1], rtol=1e-12, atol=1e-14):
                            raise ChartError(f"metric is not symmetric in entries ({i + 1},{j + 1})")
            self.components = tuple(tuple(r) for r in comps)
        else:
            self.components = None
        self._compiled = {}
        if check:
            self.check_positive_definite()

    @classmethod
    def from_strings(cls, chart, rows, **kw):
        return cls(chart, [[chart.parse(s) if isinstance(s, str) else s for s in r] for r in rows], **kw)

    @classmethod
    def euclidean(cls, chart):
        n = chart.dim
        return cls(chart, [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)])

    @property
    def dim(self):
        return self.chart.dim

    # jets -------------------------------------------------------------
    def _derivative_exprs(self, order):
        n = self.dim
        pairs = [(i, j) for i in range(n) for j in range(i, n)]
        combos = list(itertools.combinations_with_replacement(range(n), order))
        exprs = []
        for i, j in pairs:
            for combo in combos:
                e = self.components[i][j]
                for a in combo:
                    e = differentiate(e, a)
                exprs.append(e)
        return pairs, combos, exprs

    def _compiled_order(self, order):
        if order not in self._compiled:
            pairs, combos, exprs = self._derivative_exprs(order)
            self._compiled[order] = (pairs, combos, compile_exprs(exprs))
        return self._compiled[order]

    def _eval_order(self, points, order):
        """Array of shape ``(L,) + (n,)*order + (n, n)`` of order-th partials."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.dim
        npts = pts.shape[0]
        if self.function is not None:
            return self._fd_order(pts, order)
        pairs, combos, fn = self._compiled_order(order)
        vals = fn(pts.T).reshape(len(pairs), len(combos), npts)
        out = np.zeros((npts,) + (n,) * order + (n, n))
        for ci, combo in enumerate(combos):
            for perm in set(itertools.permutations(combo)):
                for pi, (i, j) in enumerate(pairs):
                    idx = (slice(None),) + perm
                    out[idx + (i, j)] = vals[pi, ci]
                    out[idx + (j, i)] = vals[pi, ci]
        return out

    def _fd_order(self, pts, order):
        n = self.dim
        if order == 0:
            return np.array([np.asarray(self.function(p), dtype=float) for p in pts])
        lower = lambda q: self._fd_order(q, order - 1)
        out = []
        for p in pts:
            parts = []
            for a in range(n):
                h = 1e-5 * (1.0 + abs(p[a]))
                up, dn = p.copy(), p.copy()
                up[a] += h
                dn[a] -= h
                parts.append((lower(up[None])[0] - lower(dn[None])[0]) / (2 * h))
            out.append(np.array(parts))
        return np.array(out)

    def jet(self, points, order=1):
        """Tuple ``(g, dg, d2g, ...)`` up to ``order`` at each of ``points`` (batched)."""
        return tuple(self._eval_order(points, k) for k in range(order + 1))

    def __call__(self, point):
        return self._eval_order(point, 0)[0]

    # checks -----------------------------------------------------------
    def check_positive_definite(self, per_axis=5, cap=10_000):
        pts = self.chart.grid(per_axis, cap)
        g = self._eval_order(pts, 0)
        if not np.all(np.isfinite(g)):
            raise DegenerateMetricError("metric is not finite on the sampling grid")
        eig = np.linalg.eigvalsh(g)
        if np.min(eig) <= 0.0:
            bad = pts[np.argmin(eig.min(axis=1))]
            raise DegenerateMetricError(f"metric is not positive-definite near {bad.tolist()}")
        return float(np.min(eig))

    def orthonormal_frame(self, point):
        """Gram-Schmidt frame in coordinate order: columns ``F`` with ``F^T g F = I``."""
        return orthonormal_frame(self(point))

    def levi_civita(self) -> "ConnectionField":
        return ConnectionField(self.chart, metric=self)

    def product(self, other, names=None):
        """Block-diagonal product metric on the product chart."""
        return product_metric(self, other, names)


def orthonormal_frame(g):
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    frame = np.zeros((n, n))
    for a in range(n):
        v = np.zeros(n)
        v[a] = 1.0
        for _ in range(2):
            for b in range(a):
                v = v - (frame[:, b] @ g @ v) * frame[:, b]
        norm2 = v @ g @ v
        if norm2 <= 0:
            raise DegenerateMetricError("metric is degenerate at this point")
        frame[:, a] = v / np.sqrt(norm2)
    return frame


def product_metric(a: MetricField, b: MetricField, names=None):
    n, m = a.dim, b.dim
    names = names or tuple(f"{s}_1" for s in a.chart.names) + tuple(f"{s}_2" for s in b.chart.names)
    chart = Chart(n + m, a.chart.lo + b.chart.lo, a.chart.hi + b.chart.hi, names)
    shift = _Shift(n)
    comps = [[ZERO] * (n + m) for _ in range(n + m)]
    for i in range(n):
        for j in range(n):
            comps[i][j] = a.components[i][j]
    for i in range(m):
        for j in range(m):
            comps[n + i][n + j] = shift(b.components[i][j])
    return MetricField(chart, comps)


class _Shift:
    """Re-index coordinates ``x_k -> x_{k + offset}``."""

    def __init__(self, offset):
        self.offset = offset
        self.memo = {}

    def __call__(self, e: Expression):
        from . import expr as E

        key = id(e)
        if key in self.memo:
            return self.memo[key]
        if isinstance(e, E.Var):
            out = E.var(e.index + self.offset)
        elif isinstance(e, E.Num):
            out = e
        elif isinstance(e, E.Func):
            out = E.func(e.name, self(e.args[1]))
        elif isinstance(e, E.Pow):
            out = E.power(self(e.args[0]), e.args[1])
        elif isinstance(e, E.Neg):
            out = E.neg(self(e.args[0]))
        else:
            ctor = {E.Add: E.add, E.Sub: E.sub, E.Mul: E.mul, E.Div: E.div}[type(e)]
            out = ctor(self(e.args[0]), self(e.args[1]))
        self.memo[key] = out
        return out


# ---------------------------------------------------------------------------
# Levi-Civita quantities from metric jets
# ---------------------------------------------------------------------------

def _lc_from_jet(g, dg, d2g=None, d3g=None):
    """Christoffel symbols and their first two derivatives from a metric jet.

    Shapes: ``g (L,n,n)``, ``dg (L,a,n,n)``, ``d2g (L,a,b,n,n)``.  Returns
    ``gamma (L,k,i,j)``, ``dgamma (L,a,k,i,j)``, ``d2gamma (L,a,b,k,i,j)``.
    """
    if np.any(np.linalg.det(g) <= 0):
        raise DegenerateMetricError("metric is singular at an evaluation point")
    ginv = np.linalg.inv(g)
    # lowered symbols L[l,i,j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    low = 0.5 * (np.einsum("Lijl->Llij", dg) + np.einsum("Ljil->Llij", dg) - dg)
    gamma = np.einsum("Lkl,Llij->Lkij", ginv, low)
    if d2g is None:
        return gamma, None, None
    dlow = 0.5 * (np.einsum("Laijl->Lalij", d2g) + np.einsum("Lajil->Lalij", d2g) - d2g)
    dginv = -np.einsum("Lkp,Lapq,Lql->Lakl", ginv, dg, ginv)
    dgamma = np.einsum("Lakl,Llij->Lakij", dginv, low) + np.einsum("Lkl,Lalij->Lakij", ginv, dlow)
    if d3g is None:
        return gamma, dgamma, None
    d2low = 0.5 * (np.einsum("Labijl->Lablij", d3g) + np.einsum("Labjil->Lablij", d3g) - d3g)
    # d_a d_b ginv = ginv (dg_a ginv dg_b + dg_b ginv dg_a - d2g_ab) ginv
    t = (np.einsum("Lapq,Lqr,Lbrs->Labps", dg, ginv, dg)
         + np.einsum("Lbpq,Lqr,Lars->Labps", dg, ginv, dg) - d2g)
    d2ginv = np.einsum("Lkp,Labps,Lsl->Labkl", ginv, t, ginv)
    d2gamma = (np.einsum("Labkl,Llij->Labkij", d2ginv, low)
               + np.einsum("Lakl,Lblij->Labkij", dginv, dlow)
               + np.einsum("Lbkl,Lalij->Labkij", dginv, dlow)
               + np.einsum("Lkl,Lablij->Labkij", ginv, d2low))
    return gamma, dgamma, d2gamma


def _curvature_from_gamma(gamma, dgamma):
    """``omega[L,i,j,a,b] = d_i G^a_jb - d_j G^a_ib + G^a_im G^m_jb - G^a_jm G^m_ib``."""
    d = np.einsum("Liajb->Lijab", dgamma)
    comm = np.einsum("Laim,Lmjb->Lijab", gamma, gamma)
    omega = d - np.swapaxes(d, 1, 2) + comm - np.swapaxes(comm, 1, 2)
    return omega


# ---------------------------------------------------------------------------
# Connection fields
# ---------------------------------------------------------------------------

class ConnectionField:
    """Connection coefficients ``gamma[k, i, j]`` on a chart.

    Either explicit expression coefficients or derived from a metric
    (``metric_origin``).  Missing coefficients are zero.
    """

    def __init__(self, chart: Chart, coefficients=None, *, metric: MetricField | None = None):
        self.chart = chart
        self.metric = metric
        n = chart.dim
        if metric is None:
            arr = np.empty((n, n, n), dtype=object)
            arr[...] = ZERO
            if coefficients is not None:
                if isinstance(coefficients, dict):
                    for (k, i, j), e in coefficients.items():
                        arr[k, i, j] = _as_expr_in(chart, e)
                else:
                    for idx in itertools.product(range(n), repeat=3):
                        arr[idx] = _as_expr_in(chart, coefficients[idx[0]][idx[1]][idx[2]])
            self.coefficients = arr
        else:
            self.coefficients = None
        self._fn = None
        self._dfn = None

    @property
    def metric_origin(self) -> bool:
        return self.metric is not None

    @property
    def dim(self):
        return self.chart.dim

    @classmethod
    def sparse(cls, chart, entries, one_based=True):
        """From ``[(k, i, j, expr), ...]``."""
        off = 1 if one_based else 0
        coeffs = {}
        for k, i, j, e in entries:
            idx = (k - off, i - off, j - off)
            if any(not 0 <= v < chart.dim for v in idx):
                raise ChartError(f"connection index {(k, i, j)} out of range")
            coeffs[idx] = e
        return cls(chart, coeffs)

    def _flat_exprs(self):
        return list(self.coefficients.ravel())

    def gamma(self, points):
        """Coefficients at each point: shape ``(L, n, n, n)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.dim
        if self.metric is not None:
            g, dg = self.metric.jet(pts, 1)
            return _lc_from_jet(g, dg)[0]
        if self._fn is None:
            self._fn = compile_exprs(self._flat_exprs())
        vals = self._fn(pts.T)
        return np.moveaxis(vals.reshape(n, n, n, pts.shape[0]), -1, 0)

    def gamma_jet(self, points):
        """``(gamma, dgamma)`` with ``dgamma[L, a, k, i, j] = d_a gamma^k_ij``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.dim
        if self.metric is not None:
            g, dg, d2g = self.metric.jet(pts, 2)
            gam, dgam, _ = _lc_from_jet(g, dg, d2g)
            return gam, dgam
        if self._dfn is None:
            flat = self._flat_exprs()
            self._dfn = compile_exprs([differentiate(e, a) for a in range(n) for e in flat])
        d = self._dfn(pts.T).reshape(n, n, n, n, pts.shape[0])
        return self.gamma(pts), np.moveaxis(d, -1, 0)

    def curvature(self, points):
        gam, dgam = self.gamma_jet(points)
        return _curvature_from_gamma(gam, dgam)


def _point(p):
    return np.asarray(p, dtype=float).reshape(-1)


def christoffel(g: MetricField, p):
    """Levi-Civita symbols ``gamma[k, i, j]`` at ``p``."""
    p = _point(p)
    g.chart.require(p)
    gg, dg = g.jet(p, 1)
    return _lc_from_jet(gg, dg)[0][0]


@dataclass(frozen=True)
class CurvatureTensor:
    """The (4,0) Riemann tensor ``R[i, j, k, l]`` at a point, in coordinates."""

    components: np.ndarray
    metric: np.ndarray
    point: np.ndarray = field(default=None)

    @property
    def dim(self):
        return self.components.shape[0]

    def in_frame(self, frame):
        """Components with respect to the frame whose columns are ``frame``."""
        return np.einsum("ijkl,ia,jb,kc,ld->abcd", self.components, frame, frame, frame, frame)

    def orthonormal(self, frame=None):
        """Components in an orthonormal frame (Gram-Schmidt by default)."""
        frame = orthonormal_frame(self.metric) if frame is None else frame
        return self.in_frame(frame)

    def abstract(self, frame=None):
        from .decomp import AbstractCurvature

        return AbstractCurvature(self.orthonormal(frame))

    def symmetry_defects(self):
        r = self.components
        scale = max(np.abs(r).max(), 1e-300)
        return {
            "antisym_12": float(np.abs(r + r.transpose(1, 0, 2, 3)).max() / scale),
            "antisym_34": float(np.abs(r + r.transpose(0, 1, 3, 2)).max() / scale),
            "pair": float(np.abs(r - r.transpose(2, 3, 0, 1)).max() / scale),
            "bianchi": float(np.abs(r + r.transpose(1, 2, 0, 3) + r.transpose(2, 0, 1, 3)).max() / scale),
        }

    def sectional(self, i, j):
        g = self.metric
        return self.components[i, j, i, j] / (g[i, i] * g[j, j] - g[i, j] ** 2)


def _riemann_batch(g: MetricField, pts):
    gg, dg, d2g = g.jet(pts, 2)
    gam, dgam, _ = _lc_from_jet(gg, dg, d2g)
    omega = _curvature_from_gamma(gam, dgam)
    return np.einsum("Lka,Lijal->Lijkl", gg, omega), gg


def riemann(g: MetricField, p) -> CurvatureTensor:
    p = _point(p)
    g.chart.require(p)
    r, gg = _riemann_batch(g, p)
    return CurvatureTensor(r[0], gg[0], p)


def curvature_of_connection(conn: ConnectionField, p):
    """``omega[i, j]`` = curvature endomorphism ``R(d_i, d_j)`` as an n x n matrix."""
    p = _point(p)
    conn.chart.require(p)
    return conn.curvature(p)[0]


def torsion(conn: ConnectionField, p):
    """``T[k, i, j] = gamma[k, i, j] - gamma[k, j, i]``."""
    p = _point(p)
    conn.chart.require(p)
    gam = conn.gamma(p)[0]
    return gam - gam.transpose(0, 2, 1)


def nabla_R(g: MetricField, p):
    """Covariant derivative ``DR[m, i, j, k, l] = (nabla_m R)_ijkl`` in coordinates."""
    p = _point(p)
    g.chart.require(p)
    gg, dg, d2g, d3g = g.jet(p, 3)
    gam, dgam, d2gam = _lc_from_jet(gg, dg, d2g, d3g)
    gam, dgam, d2gam, gg, dg = gam[0], dgam[0], d2gam[0], gg[0], dg[0]
    omega = _curvature_from_gamma(gam[None], dgam[None])[0]  # [i,j,a,l]
    # d_m omega[i,j,a,l]
    dd = np.einsum("miajl->mijal", d2gam)
    dcomm = np.einsum("maip,pjl->mijal", dgam, gam) + np.einsum("aip,mpjl->mijal", gam, dgam)
    domega = dd - dd.transpose(0, 2, 1, 3, 4) + dcomm - dcomm.transpose(0, 2, 1, 3, 4)
    r = np.einsum("ka,ijal->ijkl", gg, omega)
    dr = np.einsum("mka,ijal->mijkl", dg, omega) + np.einsum("ka,mijal->mijkl", gg, domega)
    nab = (dr
           - np.einsum("pmi,pjkl->mijkl", gam, r)
           - np.einsum("pmj,ipkl->mijkl", gam, r)
           - np.einsum("pmk,ijpl->mijkl", gam, r)
           - np.einsum("pml,ijkp->mijkl", gam, r))
    return nab


def to_frame(tensor, frame):
    """Contract every (covariant) index of ``tensor`` with ``frame``."""
    out = tensor
    for axis in range(tensor.ndim):
        out = np.moveaxis(np.tensordot(out, frame, axes=([axis], [0])), -1, axis)
    return out


def metric_compatibility_defect(g: MetricField, p):
    """``max |d_k g_ij - G^l_ki g_lj - G^l_kj g_il|``."""
    p = _point(p)
    gg, dg = g.jet(p, 1)
    gam = _lc_from_jet(gg, dg)[0][0]
    gg, dg = gg[0], dg[0]
    pred = np.einsum("lki,lj->kij", gam, gg) + np.einsum("lkj,il->kij", gam, gg)
    return float(np.abs(dg - pred).max())
