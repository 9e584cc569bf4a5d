from __future__ import annotations

from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hololab.algebra import (AlgebraInputError, AlternatingForm, center, commutant, compound_matrix, hodge_star,
                             induced_action, invariant_tensors, orthonormal_rows, principal_angles, so_basis,
                             span_closure, span_of, stabilizer)


def _random_form(rng, n, k):
    return AlternatingForm(n, k, rng.standard_normal(comb(n, k)))


def _antisymmetrize(form):
    """Dense antisymmetric array of a form, by brute force over permutations."""
    return form.components()


def test_wedge_of_one_forms_is_determinant(rng):
    a, b = rng.standard_normal(3), rng.standard_normal(3)
    w = AlternatingForm(3, 1, a) ^ AlternatingForm(3, 1, b)
    # coefficient of dx_i ^ dx_j is the 2x2 minor a_i b_j - a_j b_i
    assert np.isclose(w.component(0, 1), a[0] * b[1] - a[1] * b[0])
    assert np.isclose(w.component(1, 0), -(a[0] * b[1] - a[1] * b[0]))


def test_volume_and_monomials():
    vol = AlternatingForm.volume(4)
    f = AlternatingForm.from_monomials(4, {(1, 2): 1.0}) ^ AlternatingForm.from_monomials(4, {(3, 4): 1.0})
    assert f.allclose(vol)
    assert AlternatingForm.from_monomials(4, {(2, 1): 1.0}).component(1, 2, one_based=True) == -1.0


def test_degree_above_dimension_rejected():
    with pytest.raises(AlgebraInputError):
        AlternatingForm(3, 4)


@given(st.integers(2, 6), st.data())
def test_property_wedge_graded_commutative_and_associative(n, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
    k = data.draw(st.integers(0, n))
    l = data.draw(st.integers(0, n - k))
    a, b = _random_form(rng, n, k), _random_form(rng, n, l)
    assert (a ^ b).allclose((b ^ a) * (-1) ** (k * l), atol=1e-10)
    m = data.draw(st.integers(0, n - k - l))
    c = _random_form(rng, n, m)
    assert ((a ^ b) ^ c).allclose(a ^ (b ^ c), atol=1e-9)


@given(st.integers(1, 8), st.data())
def test_property_double_star_sign(n, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
    k = data.draw(st.integers(0, n))
    a = _random_form(rng, n, k)
    assert hodge_star(hodge_star(a)).allclose(a * (-1) ** (k * (n - k)), atol=1e-12)


@given(st.integers(2, 6), st.data())
def test_property_star_characterisation_with_metric(n, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
    k = data.draw(st.integers(0, n))
    m = rng.standard_normal((n, n))
    g = m @ m.T + n * np.eye(n)
    a, b = _random_form(rng, n, k), _random_form(rng, n, k)
    lhs = (a ^ hodge_star(b, g)).coeffs[0]
    ginv = np.linalg.inv(g)
    inner = a.coeffs @ compound_matrix(ginv, k) @ b.coeffs
    assert np.isclose(lhs, inner * np.sqrt(np.linalg.det(g)), rtol=1e-9, atol=1e-9)


def test_induced_action_is_derivative_of_pullback(rng):
    n, k = 5, 3
    form = _random_form(rng, n, k)
    x = rng.standard_normal((n, n))
    h = 1e-6
    from scipy.linalg import expm
    fd = (form.pullback(expm(h * x)).coeffs - form.pullback(expm(-h * x)).coeffs) / (2 * h)
    # X.T(v) = -T(Xv, ...) - ...: the action is minus the pullback derivative
    np.testing.assert_allclose(induced_action(x, k) @ form.coeffs, -fd, atol=1e-7)


def test_span_closure_of_two_rotations_is_so3():
    e = so_basis(3)
    span = span_closure([e[0], e[2]])
    assert span.dim == 3 and span.closed
    assert span.bracket_defect() < 1e-12


@given(st.integers(2, 5), st.integers(1, 4), st.integers(0, 2**31))
def test_property_span_closure_idempotent(n, k, seed):
    rng = np.random.default_rng(seed)
    gens = []
    for _ in range(k):
        a = rng.standard_normal((n, n))
        gens.append(a - a.T)
    once = span_closure(gens, atol=1e-12)
    twice = span_closure(list(once.basis))
    assert once.dim == twice.dim
    if once.dim:
        assert principal_angles(once.flat, twice.flat).max() < 1e-8


@given(st.integers(2, 4), st.integers(0, 2**31))
def test_property_triple_commutant_stability(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    s = span_of([a - a.T, np.diag(rng.standard_normal(n))])
    c1 = commutant(s, 1e-8)
    c3 = commutant(commutant(c1, 1e-8), 1e-8)
    assert c1.dim == c3.dim
    assert principal_angles(c1.flat, c3.flat).max() < 1e-6


def test_center_of_u2():
    # u(2) inside so(4): su(2) (left multiplication by imaginary quaternions) plus the complex structure
    j = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], float)
    e = so_basis(4)
    comm = commutant(span_of([j]), 1e-10)
    skew = [0.5 * (c - c.T) for c in comm.basis]
    u2 = span_of(skew, 4, 1e-8, 1e-10)
    assert u2.dim == 4
    z = center(u2, 1e-8)
    assert z.dim == 1
    assert abs(abs(np.sum(z.basis[0] * j)) / np.linalg.norm(j) - 1) < 1e-10
    del e


@given(st.integers(2, 5), st.integers(1, 3), st.integers(0, 2**31))
def test_property_invariant_tensors_are_invariant(n, k, seed):
    k = min(k, n)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    span = span_closure([a - a.T])
    for t in invariant_tensors(span, k, tol=1e-9):
        for x in span.basis:
            assert t.act(x).norm() < 1e-8 * max(t.norm(), 1.0)


def test_symplectic_stabilizer_dims():
    for m, expected in ((2, 4), (3, 9)):
        w = AlternatingForm.from_monomials(2 * m, {(2 * l + 1, 2 * l + 2): 1.0 for l in range(m)})
        assert stabilizer(w, "so", tol=1e-8).dim == expected
    w = AlternatingForm.from_monomials(4, {(1, 2): 1.0, (3, 4): 1.0})
    assert stabilizer(w, "gl", tol=1e-8).dim == 10  # sp(4, R)


def test_principal_angles_of_known_planes():
    a = np.eye(3)[:2]
    t = 0.3
    b = np.array([[1, 0, 0], [0, np.cos(t), np.sin(t)]])
    np.testing.assert_allclose(principal_angles(a, b), [0.0, t], atol=1e-12)
    assert orthonormal_rows(np.zeros((2, 3))).shape == (0, 3)


def test_generator_validation():
    with pytest.raises(AlgebraInputError):
        span_of([np.zeros((2, 3))])
    with pytest.raises(AlgebraInputError):
        span_of([np.full((2, 2), np.nan)])
