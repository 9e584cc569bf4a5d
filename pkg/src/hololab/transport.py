"""Curves, parallel transport and geodesics on a chart.

Transport solves ``f' = -A(c'(t)) f`` with ``A(v)[a, b] = sum_k v^k gamma[a, k, b]``
by fixed-step classical RK4.  Many curves can be integrated together: every
batched routine carries a leading batch axis ``L``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chart import Chart, ChartError, ConnectionField, DomainError, MetricField, orthonormal_frame

STEPS_PER_UNIT = 1000
_GAMMA_BLOCK = 64  # RK4 steps whose nodes are evaluated in one vectorized call


class TransportError(ChartError):
    pass


class OpenCurveError(ChartError):
    pass


# ---------------------------------------------------------------------------
# Segments and curves
# ---------------------------------------------------------------------------

class Segment:
    """A smooth map ``[0, 1] -> chart`` with its velocity."""

    def point(self, t):
        raise NotImplementedError

    def velocity(self, t):
        raise NotImplementedError

    def reversed(self) -> "Segment":
        return _ReversedSegment(self)

    @property
    def start(self):
        return self.point(np.array([0.0]))[0]

    @property
    def end(self):
        return self.point(np.array([1.0]))[0]

    def length(self, samples=64):
        """Coordinate (Euclidean) length, estimated from a polyline if needed."""
        pts = self.point(np.linspace(0.0, 1.0, samples + 1))
        return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


@dataclass(frozen=True, eq=False)
class LinearSegment(Segment):
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))

    def point(self, t):
        t = np.asarray(t, dtype=float)[:, None]
        return self.a + t * (self.b - self.a)

    def velocity(self, t):
        return np.broadcast_to(self.b - self.a, (len(np.atleast_1d(t)), self.a.size))

    def reversed(self):
        return LinearSegment(self.b, self.a)

    def length(self, samples=64):
        return float(np.linalg.norm(self.b - self.a))


@dataclass(frozen=True, eq=False)
class ParametricSegment(Segment):
    """Analytic segment given by vectorized ``point(t)`` and ``velocity(t)`` callables."""

    point_fn: object
    velocity_fn: object

    def point(self, t):
        return np.asarray(self.point_fn(np.asarray(t, dtype=float)), dtype=float)

    def velocity(self, t):
        return np.asarray(self.velocity_fn(np.asarray(t, dtype=float)), dtype=float)


@dataclass(frozen=True, eq=False)
class SampledSegment(Segment):
    """Cubic Hermite interpolation through samples ``x`` with velocities ``v`` (per unit t)."""

    x: np.ndarray
    v: np.ndarray

    def _locate(self, t):
        m = len(self.x) - 1
        s = np.clip(np.asarray(t, dtype=float), 0.0, 1.0) * m
        k = np.minimum(s.astype(int), m - 1)
        return k, (s - k)[:, None], 1.0 / m

    def point(self, t):
        k, u, h = self._locate(t)
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        return (h00 * self.x[k] + h10 * h * self.v[k] + h01 * self.x[k + 1] + h11 * h * self.v[k + 1])

    def velocity(self, t):
        k, u, h = self._locate(t)
        d00 = (6 * u**2 - 6 * u) / h
        d10 = 3 * u**2 - 4 * u + 1
        d01 = (-6 * u**2 + 6 * u) / h
        d11 = 3 * u**2 - 2 * u
        return d00 * self.x[k] + d10 * self.v[k] + d01 * self.x[k + 1] + d11 * self.v[k + 1]


@dataclass(frozen=True, eq=False)
class _ReversedSegment(Segment):
    inner: Segment

    def point(self, t):
        return self.inner.point(1.0 - np.asarray(t, dtype=float))

    def velocity(self, t):
        return -self.inner.velocity(1.0 - np.asarray(t, dtype=float))

    def reversed(self):
        return self.inner


@dataclass(frozen=True, eq=False)
class Curve:
    """Piecewise smooth curve: a list of segments joined end to start."""

    chart: Chart
    segments: tuple
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ChartError("a curve needs at least one segment")
        object.__setattr__(self, "segments", segs)
        for s1, s2 in zip(segs, segs[1:]):
            gap = np.linalg.norm(s1.end - s2.start)
            if gap > 1e-9 * (1.0 + np.linalg.norm(s1.end)):
                raise ChartError(f"curve segments do not join (gap {gap:.3e})")

    @classmethod
    def polyline(cls, chart, vertices):
        v = np.asarray(vertices, dtype=float)
        return cls(chart, tuple(LinearSegment(a, b) for a, b in zip(v[:-1], v[1:])))

    @property
    def start(self):
        return self.segments[0].start

    @property
    def end(self):
        return self.segments[-1].end

    @property
    def closed(self):
        return bool(np.linalg.norm(self.end - self.start) < 1e-12)

    def reversed(self) -> "Curve":
        return Curve(self.chart, tuple(s.reversed() for s in reversed(self.segments)))

    def then(self, other: "Curve") -> "Curve":
        """Concatenation: traverse ``self`` first, then ``other``."""
        return Curve(self.chart, self.segments + other.segments)

    def length(self):
        return sum(s.length() for s in self.segments)

    def sample(self, per_segment=64):
        t = np.linspace(0.0, 1.0, per_segment + 1)
        return np.concatenate([s.point(t) for s in self.segments])

    def check_domain(self, per_segment=64):
        pts = self.sample(per_segment)
        lo, hi = np.array(self.chart.lo), np.array(self.chart.hi)
        bad = np.any((pts <= lo) | (pts >= hi), axis=1)
        if np.any(bad):
            raise DomainError(f"curve leaves the chart domain near {pts[np.argmax(bad)].tolist()}")


# ---------------------------------------------------------------------------
# RK4 kernels
# ---------------------------------------------------------------------------

def _rk4(conn: ConnectionField, point_fn, velocity_fn, frames, nsteps):
    """Integrate ``f' = -A(c') f`` for a batch.

    ``point_fn(t)`` / ``velocity_fn(t)`` map an array of ``T`` times to arrays
    of shape ``(T, L, n)``.  ``frames`` has shape ``(L, n, m)``.
    """
    f = np.array(frames, dtype=float, copy=True)
    L, n = f.shape[0], f.shape[1]
    h = 1.0 / nsteps
    for s0 in range(0, nsteps, _GAMMA_BLOCK):
        s1 = min(nsteps, s0 + _GAMMA_BLOCK)
        times = np.linspace(s0 * h, s1 * h, 2 * (s1 - s0) + 1)
        pts = point_fn(times)
        vel = velocity_fn(times)
        gam = conn.gamma(pts.reshape(-1, n)).reshape(len(times), L, n, n, n)
        amat = np.einsum("TLakb,TLk->TLab", gam, vel)
        if not np.all(np.isfinite(amat)):
            raise TransportError("connection coefficients are not finite along the curve")
        for s in range(s1 - s0):
            a0, am, a1 = amat[2 * s], amat[2 * s + 1], amat[2 * s + 2]
            k1 = -a0 @ f
            k2 = -am @ (f + 0.5 * h * k1)
            k3 = -am @ (f + 0.5 * h * k2)
            k4 = -a1 @ (f + h * k3)
            f = f + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return f


def _segment_steps(length, steps_per_unit):
    return max(4, int(np.ceil(steps_per_unit * length)))


def transport_segment(conn, segment: Segment, frames, nsteps):
    """Transport a single frame (n x m) along one segment."""
    f = np.asarray(frames, dtype=float)[None]
    out = _rk4(conn,
               lambda t: segment.point(t)[:, None, :],
               lambda t: segment.velocity(t)[:, None, :],
               f, nsteps)
    return out[0]


def transport_linear_batch(conn: ConnectionField, starts, ends, frames=None, steps_per_unit=STEPS_PER_UNIT,
                           nsteps=None):
    """Transport along straight segments ``starts[l] -> ends[l]`` for a whole batch.

    Returns ``(L, n, m)``; ``frames`` defaults to identities.
    """
    a = np.asarray(starts, dtype=float)
    b = np.asarray(ends, dtype=float)
    L, n = a.shape
    if frames is None:
        frames = np.broadcast_to(np.eye(n), (L, n, n))
    if nsteps is None:
        longest = float(np.max(np.linalg.norm(b - a, axis=1))) if L else 0.0
        nsteps = _segment_steps(longest, steps_per_unit)
    d = b - a
    return _rk4(conn,
                lambda t: a[None] + t[:, None, None] * d[None],
                lambda t: np.broadcast_to(d, (len(t),) + d.shape),
                frames, nsteps)


def transport_polyline_batch(conn, vertices, frames=None, steps_per_unit=STEPS_PER_UNIT):
    """Transport along batched polylines ``vertices[l, m, :]``; returns ``(L, n, n)``."""
    v = np.asarray(vertices, dtype=float)
    L, _, n = v.shape
    f = np.broadcast_to(np.eye(n), (L, n, n)) if frames is None else frames
    for k in range(v.shape[1] - 1):
        f = transport_linear_batch(conn, v[:, k], v[:, k + 1], f, steps_per_unit)
    return f


@dataclass(frozen=True)
class TransportResult:
    matrix: np.ndarray
    step_count: int
    error_estimate: float


def _curve_steps(curve: Curve, steps, steps_per_unit):
    lengths = np.array([s.length() for s in curve.segments])
    if steps is None:
        return [_segment_steps(l, steps_per_unit) for l in lengths]
    total = max(lengths.sum(), 1e-300)
    return [max(4, int(round(steps * l / total))) for l in lengths]


def _transport_curve(conn, curve, frame, counts):
    f = np.asarray(frame, dtype=float)
    for seg, k in zip(curve.segments, counts):
        f = transport_segment(conn, seg, f, k)
    return f


def parallel_transport(conn: ConnectionField, curve: Curve, frame=None, steps=None,
                       steps_per_unit=STEPS_PER_UNIT, estimate_error=True) -> TransportResult:
    """Parallel transport of ``frame`` (columns, default identity) along ``curve``.

    ``steps`` fixes the total RK4 step count (split over segments by length);
    otherwise ``steps_per_unit`` per unit coordinate length is used.  The error
    estimate compares against a run with half the steps (Richardson, order 4)
    and is floored at the accumulated round-off level.
    """
    n = conn.dim
    frame = np.eye(n) if frame is None else np.asarray(frame, dtype=float)
    if frame.shape[0] != n or (frame.shape == (n, n) and abs(np.linalg.det(frame)) < 1e-300):
        raise ChartError("initial frame must be an invertible n x n matrix")
    curve.check_domain()
    counts = _curve_steps(curve, steps, steps_per_unit)
    mat = _transport_curve(conn, curve, frame, counts)
    err = 0.0
    if estimate_error:
        coarse = _transport_curve(conn, curve, frame, [max(2, k // 2) for k in counts])
        err = float(np.abs(mat - coarse).max()) / 15.0
        err = max(err, np.finfo(float).eps * sum(counts) * max(1.0, float(np.abs(mat).max())))
    return TransportResult(mat, int(sum(counts)), err)


# ---------------------------------------------------------------------------
# Geodesics
# ---------------------------------------------------------------------------

def geodesic(g: MetricField, x0, v0, T, steps=None) -> Curve:
    """RK4 geodesic ``x'' + gamma(x', x') = 0`` from ``x0`` with velocity ``v0``.

    The returned curve is parametrized by ``s = t / T`` on ``[0, 1]``; if the
    solution would leave the domain it stops at the last interior step and
    ``truncated`` is set.  ``meta`` holds the raw samples ``t``, ``x``, ``v``.
    """
    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    g.chart.require(x)
    if not np.any(v):
        raise ChartError("initial velocity must be nonzero")
    if not T > 0:
        raise ChartError("parameter length must be positive")
    conn = g.levi_civita()
    if steps is None:
        steps = max(100, int(np.ceil(STEPS_PER_UNIT * T * np.linalg.norm(v))))
    h = T / steps

    def acc(xx, vv):
        gam = conn.gamma(xx)[0]
        return -np.einsum("kij,i,j->k", gam, vv, vv)

    xs, vs = [x.copy()], [v.copy()]
    truncated = False
    for _ in range(steps):
        try:
            k1x, k1v = v, acc(x, v)
            p2 = x + 0.5 * h * k1x
            g.chart.require(p2)
            k2x, k2v = v + 0.5 * h * k1v, acc(p2, v + 0.5 * h * k1v)
            p3 = x + 0.5 * h * k2x
            g.chart.require(p3)
            k3x, k3v = v + 0.5 * h * k2v, acc(p3, v + 0.5 * h * k2v)
            p4 = x + h * k3x
            g.chart.require(p4)
            k4x, k4v = v + h * k3v, acc(p4, v + h * k3v)
            xn = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
            vn = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
            g.chart.require(xn)
        except DomainError:
            truncated = True
            break
        x, v = xn, vn
        xs.append(x.copy())
        vs.append(v.copy())
    xs, vs = np.array(xs), np.array(vs)
    t_end = h * (len(xs) - 1)
    if len(xs) < 2:
        raise DomainError("geodesic leaves the domain immediately")
    seg = SampledSegment(xs, vs * t_end)
    meta = {"t": np.linspace(0.0, t_end, len(xs)), "x": xs, "v": vs, "t_end": t_end}
    return Curve(g.chart, (seg,), truncated=truncated, meta=meta)


def speed_profile(g: MetricField, curve: Curve):
    """``|x'(t)|_g`` at the samples stored by :func:`geodesic`."""
    xs, vs = curve.meta["x"], curve.meta["v"]
    gg = g.jet(xs, 0)[0]
    return np.sqrt(np.einsum("Li,Lij,Lj->L", vs, gg, vs))


def arc_length(g: MetricField, curve: Curve, samples=2000):
    total = 0.0
    t = np.linspace(0.0, 1.0, samples + 1)
    w = np.ones_like(t)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0  # Simpson weights (samples even)
    for seg in curve.segments:
        x, v = seg.point(t), seg.velocity(t)
        gg = g.jet(x, 0)[0]
        sp = np.sqrt(np.einsum("Li,Lij,Lj->L", v, gg, v))
        total += float(np.sum(w * sp) / (3 * samples))
    return total


# ---------------------------------------------------------------------------
# Loops and holonomy elements
# ---------------------------------------------------------------------------

def rectangle_vertices(x0, i, j, eps_i, eps_j=None):
    eps_j = eps_i if eps_j is None else eps_j
    x0 = np.asarray(x0, dtype=float)
    ei = np.zeros_like(x0)
    ej = np.zeros_like(x0)
    ei[i] = eps_i
    ej[j] = eps_j
    return np.array([x0, x0 + ei, x0 + ei + ej, x0 + ej, x0])


def loop_rectangle(chart: Chart, x0, i: int, j: int, eps: float) -> Curve:
    """Closed coordinate rectangle ``x0 -> +eps e_i -> +eps e_j -> back`` (0-based axes)."""
    if i == j:
        raise ChartError("rectangle axes must differ")
    if not (0 <= i < chart.dim and 0 <= j < chart.dim):
        raise ChartError("rectangle axis out of range")
    if eps == 0:
        raise ChartError("rectangle side must be nonzero")
    verts = rectangle_vertices(x0, i, j, eps)
    for p in verts:
        chart.require(p)
    return Curve.polyline(chart, verts)


def basepoint_frame(conn: ConnectionField, x0):
    """Orthonormal Gram-Schmidt frame for metric connections, identity otherwise."""
    if conn.metric is not None:
        return orthonormal_frame(conn.metric(x0))
    return np.eye(conn.dim)


def holonomy_element(conn: ConnectionField, loop: Curve, frame=None, steps=None) -> np.ndarray:
    """Holonomy of a closed loop, ``F^-1 P F`` in the basepoint frame ``F``."""
    if not loop.closed:
        raise OpenCurveError("holonomy needs a closed loop (endpoint gap >= 1e-12)")
    frame = basepoint_frame(conn, loop.start) if frame is None else np.asarray(frame, dtype=float)
    res = parallel_transport(conn, loop, np.eye(conn.dim), steps=steps, estimate_error=False)
    return np.linalg.solve(frame, res.matrix @ frame)


def latitude_circle(chart: Chart, theta0, phi0=0.0, turns=1.0) -> Curve:
    """Analytic circle ``theta = theta0`` on the polar sphere chart.

    The circle closes on the sphere, but in the chart its end sits ``2 pi turns``
    further along ``phi``; since the metric does not depend on ``phi`` the
    coordinate frames at both ends agree and :func:`parallel_transport` gives
    the holonomy directly.
    """
    w = 2 * np.pi * turns

    def point(t):
        t = np.atleast_1d(t)
        return np.stack([np.full_like(t, theta0), phi0 + w * t], axis=-1)

    def velocity(t):
        t = np.atleast_1d(t)
        return np.stack([np.zeros_like(t), np.full_like(t, w)], axis=-1)

    return Curve(chart, (ParametricSegment(point, velocity),))
