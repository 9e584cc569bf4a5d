"""Two independent estimates of the holonomy Lie algebra at a basepoint.

* ``curvature_span_algebra``: curvature endomorphisms sampled over the chart,
  transported back to the basepoint along straight coordinate segments, then
  closed under brackets.
* ``loop_holonomy_algebra``: logarithms of holonomies of small coordinate
  rectangles (directly at the basepoint and as lassos at auxiliary points),
  scaled by the enclosed area and extrapolated to zero size.

Both are expressed in the basepoint frame ``F`` (orthonormal for metric
connections), i.e. an endomorphism ``E`` in coordinates becomes ``F^-1 E F``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import logm

from .algebra import MatrixAlgebraSpan, orthonormal_rows, principal_angles, span_closure
from .chart import ChartError, ConnectionField
from .transport import STEPS_PER_UNIT, basepoint_frame, rectangle_vertices, transport_linear_batch, \
    transport_polyline_batch

DEFAULT_SEED = 0x484F4C4F
DEFAULT_EPS_SCHEDULE = (0.2, 0.1, 0.05)
N_RANDOM_SAMPLES = 8


class HolonomyError(ChartError):
    pass


class EpsilonTooLargeError(HolonomyError):
    """A loop holonomy is too far from the identity for the principal logarithm."""


class FrameMismatchError(HolonomyError):
    pass


@dataclass(frozen=True)
class HolonomyAlgebra:
    basepoint: np.ndarray
    frame: np.ndarray
    span: MatrixAlgebraSpan
    method: str
    eps_schedule: tuple = ()
    generators: np.ndarray = field(default=None, repr=False)
    metric: bool = False

    @property
    def dim(self):
        return self.span.dim

    @property
    def basis(self):
        return self.span.basis

    def skew_defect(self):
        if self.span.dim == 0:
            return 0.0
        b = self.span.basis
        return float(np.abs(b + b.transpose(0, 2, 1)).max())


def sample_points(chart, basepoint, seed=DEFAULT_SEED, n_random=N_RANDOM_SAMPLES, fraction=0.25):
    """Basepoint, basepoint +/- delta e_a (delta = fraction of the half width) and seeded random points."""
    x0 = np.asarray(basepoint, dtype=float)
    delta = fraction * chart.half_width
    pts = [x0]
    for a in range(chart.dim):
        for s in (1.0, -1.0):
            p = x0.copy()
            p[a] += s * delta[a]
            if not chart.contains(p):
                p[a] = x0[a] - s * delta[a]
            pts.append(p)
    rng = np.random.default_rng(seed)
    lo, hi = np.array(chart.lo), np.array(chart.hi)
    margin = 0.05 * (hi - lo)
    for _ in range(n_random):
        pts.append(rng.uniform(lo + margin, hi - margin))
    return np.array(pts)


def _resolve(conn: ConnectionField, basepoint, frame):
    x0 = conn.chart.center if basepoint is None else np.asarray(basepoint, dtype=float)
    conn.chart.require(x0)
    f = basepoint_frame(conn, x0) if frame is None else np.asarray(frame, dtype=float)
    return x0, f


def _to_frame(mats, frame):
    finv = np.linalg.inv(frame)
    return np.einsum("ab,Lbc,cd->Lad", finv, mats, frame)


def curvature_span_algebra(conn: ConnectionField, basepoint=None, samples=None, tol=1e-6, frame=None,
                           seed=DEFAULT_SEED, steps_per_unit=STEPS_PER_UNIT) -> HolonomyAlgebra:
    """Bracket closure of ``P^-1 omega_p(d_i, d_j) P`` over sample points ``p``."""
    x0, f = _resolve(conn, basepoint, frame)
    pts = sample_points(conn.chart, x0, seed) if samples is None else np.atleast_2d(np.asarray(samples, float))
    for p in pts:
        conn.chart.require(p)
    n = conn.dim
    transports = transport_linear_batch(conn, np.broadcast_to(x0, pts.shape), pts,
                                        steps_per_unit=steps_per_unit)
    omega = conn.curvature(pts)
    iu, ju = np.triu_indices(n, 1)
    om = omega[:, iu, ju]  # (S, pairs, n, n)
    pinv = np.linalg.inv(transports)
    back = np.einsum("Sab,SPbc,Scd->SPad", pinv, om, transports).reshape(-1, n, n)
    gens = _to_frame(back, f) if len(back) else np.zeros((0, n, n))
    span = span_closure(gens, tol=tol, atol=_atol(gens, tol), n=n)
    return HolonomyAlgebra(x0, f, span, "curvature-span", (), gens, conn.metric is not None)


def _atol(gens, tol):
    scale = float(np.abs(gens).max()) if len(gens) else 0.0
    return max(1e-9, tol * scale * 1e-2)


def _neville_at_zero(xs, ys):
    """Value at 0 of the interpolating polynomial through ``(xs[k], ys[k])``."""
    p = [np.array(y, dtype=float) for y in ys]
    m = len(xs)
    for level in range(1, m):
        for k in range(m - level):
            x_lo, x_hi = xs[k], xs[k + level]
            p[k] = (x_hi * p[k] - x_lo * p[k + 1]) / (x_hi - x_lo)
    return p[0]


def extrapolate_to_zero(eps_schedule, values):
    """Polynomial (Richardson) extrapolation of ``values[k] = X(eps_k)`` to ``eps = 0``."""
    eps = [float(e) for e in eps_schedule]
    if len(eps) == 1:
        return np.array(values[0], dtype=float)
    return _neville_at_zero(eps, list(values))


def _principal_log(mats):
    out = np.empty_like(mats)
    for k, g in enumerate(mats):
        dist = np.linalg.norm(g - np.eye(g.shape[0]), 2)
        if dist >= 1.0:
            raise EpsilonTooLargeError(
                f"loop holonomy is too far from the identity (|g - I| = {dist:.3f}); shrink eps")
        out[k] = np.real(logm(g))
    return out


def loop_generators(conn: ConnectionField, basepoint=None, eps_schedule=DEFAULT_EPS_SCHEDULE, axis_pairs=None,
                    lasso_points=None, frame=None, seed=DEFAULT_SEED, steps_per_unit=STEPS_PER_UNIT):
    """Extrapolated ``log(g)/area`` for every (lasso point, axis pair); shape ``(L, n, n)``."""
    x0, f = _resolve(conn, basepoint, frame)
    chart = conn.chart
    n = conn.dim
    eps_schedule = tuple(float(e) for e in eps_schedule)
    if not eps_schedule or any(e <= 0 for e in eps_schedule):
        raise HolonomyError("eps schedule must contain positive sides")
    pairs = list(itertools.combinations(range(n), 2)) if axis_pairs is None else [tuple(p) for p in axis_pairs]
    for i, j in pairs:
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise HolonomyError(f"invalid axis pair {(i, j)}")
    if lasso_points is None:
        lasso_points = sample_points(chart, x0, seed, n_random=0)[1:]
    qs = np.vstack([x0[None], np.asarray(lasso_points, dtype=float).reshape(-1, n)])
    for q in qs:
        chart.require(q)
    # lasso tails mu: straight segment basepoint -> q
    tails = transport_linear_batch(conn, np.broadcast_to(x0, qs.shape), qs, steps_per_unit=steps_per_unit)
    emax = max(eps_schedule)
    hi = np.array(chart.hi)
    lo = np.array(chart.lo)
    signs = np.where(qs + emax < hi, 1.0, -1.0)
    if np.any((qs - emax <= lo) & (signs < 0)):
        raise EpsilonTooLargeError("largest rectangle does not fit inside the chart domain")
    combos = [(qi, i, j) for qi in range(len(qs)) for (i, j) in pairs]
    per_eps = []
    for eps in eps_schedule:
        verts = np.array([rectangle_vertices(qs[qi], i, j, signs[qi, i] * eps, signs[qi, j] * eps)
                          for qi, i, j in combos])
        hol = transport_polyline_batch(conn, verts, steps_per_unit=steps_per_unit)
        tail = tails[[c[0] for c in combos]]
        g = np.linalg.solve(tail, hol @ tail)  # mu^-1 sigma mu
        g = _to_frame(g, f)
        area = np.array([signs[qi, i] * signs[qi, j] for qi, i, j in combos]) * eps * eps
        per_eps.append(_principal_log(g) / area[:, None, None])
    gens = extrapolate_to_zero(eps_schedule, per_eps)
    return x0, f, gens, combos


def loop_holonomy_algebra(conn: ConnectionField, basepoint=None, eps_schedule=DEFAULT_EPS_SCHEDULE, axis_pairs=None,
                          lasso_points=None, tol=1e-6, frame=None, seed=DEFAULT_SEED,
                          steps_per_unit=STEPS_PER_UNIT) -> HolonomyAlgebra:
    """Bracket closure of extrapolated loop logarithms (rectangles plus lassos)."""
    x0, f, gens, _ = loop_generators(conn, basepoint, eps_schedule, axis_pairs, lasso_points, frame, seed,
                                     steps_per_unit)
    span = span_closure(gens, tol=tol, atol=_atol(gens, tol), n=conn.dim)
    return HolonomyAlgebra(x0, f, span, "loop", tuple(float(e) for e in eps_schedule), gens,
                           conn.metric is not None)


@dataclass(frozen=True)
class Comparison:
    verdict: str
    max_angle_ab: float
    max_angle_ba: float
    angles: np.ndarray

    @property
    def max_angle(self):
        return max(self.max_angle_ab, self.max_angle_ba)


def _span_and_frame(x):
    if isinstance(x, HolonomyAlgebra):
        return x.span, x.frame
    return x, None


def _containment_angle(src, dst):
    """Largest angle between a unit vector of ``src`` and the subspace ``dst``."""
    if src.shape[0] == 0:
        return 0.0
    if dst.shape[0] == 0:
        return float(np.pi / 2)
    resid = src - (src @ dst.T) @ dst
    s = np.linalg.svd(resid, compute_uv=False)
    return float(np.arcsin(min(1.0, s.max()))) if s.size else 0.0


def compare_algebras(a, b, tol=1e-3) -> Comparison:
    """Compare two spans via principal angles: equal-span, A⊂B, B⊂A or incomparable."""
    sa, fa = _span_and_frame(a)
    sb, fb = _span_and_frame(b)
    if sa.ambient_dim != sb.ambient_dim:
        raise FrameMismatchError("algebras live in different ambient dimensions")
    if fa is not None and fb is not None and not np.allclose(fa, fb, atol=1e-9):
        raise FrameMismatchError("algebras are expressed in different basepoint frames")
    qa = orthonormal_rows(sa.flat) if sa.dim else sa.flat
    qb = orthonormal_rows(sb.flat) if sb.dim else sb.flat
    ab = _containment_angle(qa, qb)
    ba = _containment_angle(qb, qa)
    angles = principal_angles(qa, qb)
    if ab < tol and ba < tol:
        verdict = "equal-span"
    elif ab < tol:
        verdict = "A⊂B"
    elif ba < tol:
        verdict = "B⊂A"
    else:
        verdict = "incomparable"
    return Comparison(verdict, ab, ba, angles)
