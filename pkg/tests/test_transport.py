from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hololab.catalog import builtin
from hololab.chart import ChartError, DomainError
from hololab.transport import (Curve, OpenCurveError, ParametricSegment, arc_length, basepoint_frame, geodesic,
                               holonomy_element, latitude_circle, loop_rectangle, parallel_transport, speed_profile)


@pytest.fixture(scope="module")
def s2():
    return builtin("sphere-2")


def _rotation_angle(m):
    return math.atan2(m[1, 0], m[0, 0])


def _latitude_holonomy(s2, theta0):
    loop = latitude_circle(s2.chart, theta0, phi0=0.0)
    f = basepoint_frame(s2.connection, loop.start)
    p = parallel_transport(s2.connection, loop, f, steps=4000).matrix
    return np.linalg.solve(f, p)


def test_latitude_circle_gauss_bonnet(s2):
    # enclosed cap has area 2 pi (1 - cos theta0) = pi: the frame comes back rotated by pi
    hol = _latitude_holonomy(s2, math.pi / 3)
    np.testing.assert_allclose(hol, -np.eye(2), atol=1e-4)
    hol = _latitude_holonomy(s2, math.pi / 4)
    angle = abs(_rotation_angle(hol)) % (2 * math.pi)
    expected = (2 * math.pi * (1 - math.cos(math.pi / 4))) % (2 * math.pi)
    assert min(abs(angle - expected), abs(2 * math.pi - angle - expected)) < 1e-6


def test_flat_loops_are_identity():
    m = builtin("flat-r3")
    for axes in ((0, 1), (1, 2), (0, 2)):
        loop = loop_rectangle(m.chart, [0.1, -0.2, 0.3], *axes, 0.4)
        res = parallel_transport(m.connection, loop)
        np.testing.assert_allclose(res.matrix, np.eye(3), atol=1e-10)


def test_transport_preserves_metric(s2):
    curve = Curve.polyline(s2.chart, [[1.0, 0.0], [2.0, 1.0], [1.5, 3.0]])
    res = parallel_transport(s2.connection, curve)
    g0, g1 = s2.metric(curve.start), s2.metric(curve.end)
    np.testing.assert_allclose(res.matrix.T @ g1 @ res.matrix, g0, atol=1e-10)
    assert res.error_estimate < 1e-10


def test_reversal_inverts_and_concatenation_composes(s2):
    a = Curve.polyline(s2.chart, [[1.0, 0.0], [2.0, 1.0]])
    b = Curve.polyline(s2.chart, [[2.0, 1.0], [1.2, 2.5]])
    pa = parallel_transport(s2.connection, a).matrix
    pb = parallel_transport(s2.connection, b).matrix
    pab = parallel_transport(s2.connection, a.then(b)).matrix
    np.testing.assert_allclose(pab, pb @ pa, atol=1e-10)
    back = parallel_transport(s2.connection, a.reversed()).matrix
    np.testing.assert_allclose(back @ pa, np.eye(2), atol=1e-10)


@settings(max_examples=8)
@given(st.floats(-0.9, 0.9))
def test_property_reparametrization_invariance(a):
    s2 = builtin("sphere-2")
    p0, p1 = np.array([1.0, 0.5]), np.array([2.2, 2.0])

    # smooth monotone reparametrization s(t) = t + a t (1 - t)
    def point(t):
        t = np.atleast_1d(t)[:, None]
        return p0 + (p1 - p0) * (t + a * t * (1 - t))

    def velocity(t):
        t = np.atleast_1d(t)[:, None]
        return (p1 - p0) * (1 + a * (1 - 2 * t))

    curved = Curve(s2.chart, (ParametricSegment(point, velocity),))
    straight = Curve.polyline(s2.chart, [p0, p1])
    a = parallel_transport(s2.connection, curved, steps=6000).matrix
    b = parallel_transport(s2.connection, straight, steps=6000).matrix
    assert np.abs(a - b).max() < 1e-8


def test_rk4_orthogonality_drift_is_fourth_order(s2):
    curve = Curve.polyline(s2.chart, [[0.6, 0.0], [2.5, 4.0]])
    f = basepoint_frame(s2.connection, curve.start)
    f1 = basepoint_frame(s2.connection, curve.end)
    drifts = []
    for steps in (125, 250, 500):
        p = parallel_transport(s2.connection, curve, f, steps=steps, estimate_error=False).matrix
        q = np.linalg.solve(f1, p)
        drifts.append(np.abs(q.T @ q - np.eye(2)).max())
    ratios = [drifts[k] / drifts[k + 1] for k in range(2)]
    assert all(10 < r < 22 for r in ratios), (drifts, ratios)


def test_basepoint_conjugation(s2):
    # hol at x equals P^-1 hol(y) P for the transport P along a path x -> y
    x, y = np.array([1.2, 1.0]), np.array([1.8, 2.0])
    path = Curve.polyline(s2.chart, [x, y])
    p = parallel_transport(s2.connection, path).matrix
    ly = loop_rectangle(s2.chart, y, 0, 1, 0.2)
    lasso = path.then(ly).then(path.reversed())
    hx = parallel_transport(s2.connection, lasso).matrix
    hy = parallel_transport(s2.connection, ly).matrix
    np.testing.assert_allclose(hx, np.linalg.solve(p, hy @ p), atol=1e-10)


def test_geodesic_speed_and_great_circle_length(s2):
    # start near the south edge heading north: a meridian arc of length pi/2
    curve = geodesic(s2.metric, [2.8, 1.0], [-1.0, 0.0], math.pi / 2)
    assert not curve.truncated
    sp = speed_profile(s2.metric, curve)
    assert np.ptp(sp) < 1e-10
    assert abs(arc_length(s2.metric, curve) - math.pi / 2) < 1e-8
    np.testing.assert_allclose(curve.end, [2.8 - math.pi / 2, 1.0], atol=1e-10)


def test_geodesic_truncates_at_chart_edge(s2):
    curve = geodesic(s2.metric, [math.pi / 2, 1.0], [1.0, 0.0], math.pi)
    assert curve.truncated
    assert curve.meta["t_end"] < math.pi


def test_stereographic_geodesic_is_a_great_circle():
    m = builtin("sphere-3")
    curve = geodesic(m.metric, [0.1, 0.2, -0.1], [0.3, -0.2, 0.5], 1.0)
    assert np.ptp(speed_profile(m.metric, curve)) < 1e-9
    # inverse stereographic projection: the image lies in a 2-plane through the origin of R^4
    x = curve.meta["x"]
    r2 = np.sum(x * x, axis=1, keepdims=True)
    y = np.hstack([2 * x, 1 - r2]) / (1 + r2)
    assert np.linalg.svd(y, compute_uv=False)[2] < 1e-9


def test_curve_validation(s2):
    with pytest.raises(ChartError):
        Curve.polyline(s2.chart, [[1.0, 0.0]])
    with pytest.raises(ChartError):
        loop_rectangle(s2.chart, [1.0, 1.0], 0, 0, 0.1)
    with pytest.raises(DomainError):
        parallel_transport(s2.connection, Curve.polyline(s2.chart, [[1.0, 0.0], [3.0, 0.0]]))
    with pytest.raises(OpenCurveError):
        holonomy_element(s2.connection, Curve.polyline(s2.chart, [[1.0, 0.0], [2.0, 0.0]]))
