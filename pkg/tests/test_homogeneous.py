from __future__ import annotations

import numpy as np
import pytest

from hololab.algebra import so_basis
from hololab.catalog import builtin
from hololab.classify import berger_classify, detect_reducible
from hololab.decomp import AbstractCurvature, decompose, first_bianchi_defect
from hololab.holonomy import curvature_span_algebra
from hololab.homogeneous import (HOMOGENEOUS_CATALOG, MAX_DENSE_DIM, HomogeneousError, LieAlgebraData,
                                 NotSymmetricError, ReductiveSplit, canonical_torsion, check_symmetric,
                                 curvature_endomorphism, homogeneous_model, isotropy_representation,
                                 sphere_model, symmetric_curvature, symmetric_holonomy)


def curvature_tensor(split):
    """``R[a, b, c, d] = <e_c, R(e_a, e_b) e_d>`` in an orthonormal basis of m."""
    f = split.orthonormal_frame()
    finv = np.linalg.inv(f)
    n = len(split.m)
    r = np.zeros((n,) * 4)
    for a in range(n):
        for b in range(n):
            r[a, b] = finv @ curvature_endomorphism(split, f[:, a], f[:, b]) @ f
    return r


@pytest.mark.parametrize("name", list(HOMOGENEOUS_CATALOG))
def test_catalog_models_satisfy_jacobi(name):
    split = homogeneous_model(name)
    assert split.algebra.jacobi_defect() < 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_sphere_models(n):
    split = sphere_model(n)
    assert check_symmetric(split)[0]
    hol = symmetric_holonomy(split)
    assert hol.dim == n * (n - 1) // 2
    r = AbstractCurvature(curvature_tensor(split))
    np.testing.assert_allclose(r.components, AbstractCurvature.identity(n).components, atol=1e-12)
    d = decompose(r)
    assert d.s == pytest.approx(n * (n - 1))


@pytest.mark.parametrize("name", ["sphere-3", "cp2", "g2c4"])
def test_symmetric_curvature_satisfies_first_bianchi(name):
    r = curvature_tensor(homogeneous_model(name))
    assert first_bianchi_defect(r).norm < 1e-12
    AbstractCurvature(r)  # pair symmetries


def test_cp2_model_is_einstein_with_pinching_four():
    split = homogeneous_model("cp2")
    r = AbstractCurvature(curvature_tensor(split))
    d = decompose(r)
    assert np.abs(d.r0).max() < 1e-12 and d.W.norm() > 0.1
    rng = np.random.default_rng(0)
    ks = []
    for _ in range(400):
        x, y = rng.standard_normal((2, 4))
        y -= (x @ y) / (x @ x) * x
        x, y = x / np.linalg.norm(x), y / np.linalg.norm(y)
        ks.append(np.einsum("abcd,a,b,c,d->", r.components, x, y, x, y))
    assert min(ks) > 0
    # holomorphic sections are 4 times the totally real ones
    assert 3.6 < max(ks) / min(ks) <= 4.0 + 1e-9


@pytest.mark.parametrize("ident, name", [("sphere-2", "sphere-2"), ("sphere-4", "sphere-4"),
                                         ("fubini-study-cp2", "cp2")])
def test_cross_oracle_with_chart_computation(ident, name):
    m = builtin(ident)
    chart_hol = curvature_span_algebra(m.connection, m.basepoint)
    model_hol = symmetric_holonomy(homogeneous_model(name))
    assert chart_hol.dim == model_hol.dim
    assert berger_classify(chart_hol).verdict == berger_classify(model_hol).verdict


def test_grassmannian_holonomy_fills_isotropy():
    split = homogeneous_model("g2c4")
    hol = symmetric_holonomy(split)
    assert len(split.h) == 7 and len(split.m) == 8 and hol.dim == 7
    # [m, m] spans h
    n = len(split.m)
    images = np.array([symmetric_curvature(split, np.eye(n)[a], np.eye(n)[b])
                       for a in range(n) for b in range(a + 1, n)])
    assert np.linalg.matrix_rank(images, tol=1e-10) == 7
    assert detect_reducible(hol) is None
    rep = berger_classify(hol)
    assert rep.verdict == "Undetermined" and rep.invariants["2-forms"] == 1


def test_s5_is_reductive_but_not_symmetric():
    split = homogeneous_model("s5")
    ok, defect = check_symmetric(split)
    assert not ok and defect > 0.1
    assert np.linalg.norm(canonical_torsion(split)) > 0
    with pytest.raises(NotSymmetricError):
        symmetric_holonomy(split)
    with pytest.raises(NotSymmetricError):
        symmetric_curvature(split, np.eye(5)[0], np.eye(5)[1])


def test_torus_is_flat():
    split = homogeneous_model("torus-3")
    assert symmetric_holonomy(split).dim == 0
    assert np.abs(canonical_torsion(split)).max() == 0.0


def test_isotropy_representation_is_skew_in_orthonormal_basis():
    for name in ("cp2", "g2c4", "s5"):
        for a in isotropy_representation(homogeneous_model(name)):
            assert np.abs(a + a.T).max() < 1e-12


def test_structure_constants_from_matrices_and_sparse_agree():
    alg = LieAlgebraData.from_matrices(so_basis(3))
    entries = [(k + 1, i + 1, j + 1, alg.c[k, i, j]) for k in range(3) for i in range(3) for j in range(i + 1, 3)
               if alg.c[k, i, j] != 0]
    sparse = LieAlgebraData.from_sparse(3, entries)
    np.testing.assert_allclose(sparse.c, alg.c)
    x, y = np.array([1.0, 2.0, 0.5]), np.array([-0.3, 0.0, 1.0])
    np.testing.assert_allclose(alg.ad(x) @ y, alg.bracket(x, y))
    kill = alg.killing()
    assert np.all(np.linalg.eigvalsh(kill) < 0)


def test_input_validation():
    with pytest.raises(HomogeneousError):
        LieAlgebraData(2, np.ones((2, 2, 2)))
    with pytest.raises(HomogeneousError):
        LieAlgebraData.from_sparse(3, [(1, 2, 3, 1.0), (1, 3, 2, 2.0)])
    with pytest.raises(HomogeneousError):
        LieAlgebraData.from_sparse(3, [(1, 2, 4, 1.0)])
    with pytest.raises(HomogeneousError):
        LieAlgebraData.from_matrices([np.eye(2), 2 * np.eye(2)])
    with pytest.raises(HomogeneousError):
        LieAlgebraData(MAX_DENSE_DIM + 1, np.zeros((MAX_DENSE_DIM + 1,) * 3))
    so3 = LieAlgebraData.from_matrices(so_basis(3))
    with pytest.raises(HomogeneousError):
        ReductiveSplit(so3, (0,), (1,), np.eye(1))  # not a partition
    with pytest.raises(HomogeneousError):
        ReductiveSplit(so3, (0,), (1, 2), np.diag([1.0, 2.0]))  # not ad(h)-invariant
    with pytest.raises(HomogeneousError):
        ReductiveSplit(so3, (0, 1), (2,), np.eye(1))  # [h, h] leaves h
    with pytest.raises(HomogeneousError):
        homogeneous_model("klein-bottle")
