from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import special_ortho_group

from hololab.algebra import span_of
from hololab.catalog import builtin
from hololab.chart import Chart, MetricField
from hololab.holonomy import (DEFAULT_SEED, EpsilonTooLargeError, FrameMismatchError, HolonomyError,
                              compare_algebras, curvature_span_algebra, extrapolate_to_zero, loop_generators,
                              loop_holonomy_algebra, sample_points)

EXPECTED_DIMS = {"flat-r3": 0, "sphere-2": 1, "sphere-4": 6, "fubini-study-cp2": 4,
                 "product(sphere-2,sphere-2)": 2, "hano-ozuki-r6": 5, "hyperbolic-3": 3}


@pytest.fixture(scope="module")
def catalog():
    return {k: builtin(k) for k in EXPECTED_DIMS}


@pytest.mark.parametrize("ident", list(EXPECTED_DIMS))
def test_curvature_span_dimensions(catalog, ident):
    hol = curvature_span_algebra(catalog[ident].connection, catalog[ident].basepoint)
    assert hol.dim == EXPECTED_DIMS[ident]
    assert hol.span.bracket_defect() < 1e-8
    if catalog[ident].metric is not None:
        assert hol.skew_defect() < 1e-8


@pytest.mark.parametrize("ident", ["sphere-2", "fubini-study-cp2", "product(sphere-2,sphere-2)"])
def test_loop_algebra_agrees_with_curvature_span(catalog, ident):
    m = catalog[ident]
    loop = loop_holonomy_algebra(m.connection, m.basepoint)
    span = curvature_span_algebra(m.connection, m.basepoint)
    cmp_ = compare_algebras(loop, span)
    assert cmp_.verdict == "equal-span" and cmp_.max_angle < 1e-3
    assert loop.span.bracket_defect() < 1e-6


def test_neville_extrapolation_is_exact_for_quadratics():
    eps = (0.2, 0.1, 0.05)
    vals = [np.array([[3.0 + 2 * e - 5 * e * e]]) for e in eps]
    np.testing.assert_allclose(extrapolate_to_zero(eps, vals), [[3.0]], atol=1e-13)


def test_loop_generator_converges_to_curvature(catalog):
    s2 = catalog["sphere-2"]
    x0, f, gens, combos = loop_generators(s2.connection, s2.basepoint, axis_pairs=[(0, 1)], lasso_points=[])
    om = s2.connection.curvature(x0[None])[0, 0, 1]
    expected = np.linalg.solve(f, om @ f)
    # log(hol)/area -> -R(d_i, d_j) with the f' = -A f transport convention
    np.testing.assert_allclose(gens[0], -expected, atol=1e-5)


def test_frame_covariance(catalog):
    m = catalog["fubini-study-cp2"]
    q = special_ortho_group.rvs(4, random_state=3)
    base = curvature_span_algebra(m.connection, m.basepoint)
    rotated = curvature_span_algebra(m.connection, m.basepoint, frame=base.frame @ q)
    conj = base.span.conjugate(q)
    assert compare_algebras(conj, rotated.span).verdict == "equal-span"


def test_compare_verdicts():
    e = np.zeros((3, 3, 3))
    from hololab.algebra import so_basis
    so3 = span_of(so_basis(3))
    so2 = span_of(so_basis(3)[:1])
    assert compare_algebras(so2, so3).verdict == "A⊂B"
    assert compare_algebras(so3, so2).verdict == "B⊂A"
    assert compare_algebras(so3, so3).verdict == "equal-span"
    other = span_of(so_basis(3)[1:2])
    assert compare_algebras(so2, other).verdict == "incomparable"
    with pytest.raises(FrameMismatchError):
        compare_algebras(so3, span_of(so_basis(4)))
    del e


def test_sample_points_are_deterministic_and_interior(catalog):
    m = catalog["sphere-4"]
    a = sample_points(m.chart, m.basepoint, DEFAULT_SEED)
    b = sample_points(m.chart, m.basepoint, DEFAULT_SEED)
    np.testing.assert_array_equal(a, b)
    assert len(a) == 2 * 4 + 1 + 8
    assert all(m.chart.contains(p) for p in a)


def test_eps_too_large_is_reported(catalog):
    s2 = catalog["sphere-2"]
    with pytest.raises(EpsilonTooLargeError):
        loop_generators(s2.connection, s2.basepoint, eps_schedule=(1.2,), lasso_points=[])
    with pytest.raises(HolonomyError):
        loop_generators(s2.connection, s2.basepoint, eps_schedule=())


@settings(max_examples=5)
@given(st.integers(0, 2**31))
def test_property_random_metric_holonomy_is_generic(seed):
    # a generic metric perturbation of flat R^3 has full holonomy so(3)
    from oracles import random_polynomial_metric_rows
    rng = np.random.default_rng(seed)
    chart = Chart.box(3, -0.5, 0.5)
    g = MetricField.from_strings(chart, random_polynomial_metric_rows(3, rng, amp=0.2))
    hol = curvature_span_algebra(g.levi_civita(), steps_per_unit=300)
    assert hol.dim == 3
