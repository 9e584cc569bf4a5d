from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import special_ortho_group

from hololab.algebra import so_basis, span_of
from hololab.catalog import builtin
from hololab.chart import Chart, MetricField
from hololab.classify import (ClassificationError, ReducibleInputError, berger_classify, classify,
                              detect_reducible, detect_symmetric)
from hololab.gstructures import (common_stabilizer, model_g2_form, model_hk_forms, model_spin7_form, qk_4form,
                                 stabilizer_algebra, standard_symplectic)
from oracles import random_polynomial_metric_rows


def _u2():
    # stabilizer of the standard symplectic form inside so(4)
    return stabilizer_algebra(standard_symplectic(2), "so")


def _conjugate(span, q):
    return span_of([q @ x @ q.T for x in span.basis], span.ambient_dim, closed=True)


SPANS = {
    "SO(4)": lambda: span_of(so_basis(4), closed=True),
    "SO(5)": lambda: span_of(so_basis(5), closed=True),
    "U(2)": _u2,
    "SU(3)": lambda: _su_m(3),
    "Sp(1)": lambda: common_stabilizer(model_hk_forms(1, "quaternionic")),
    "Sp(2)": lambda: common_stabilizer(model_hk_forms(2, "quaternionic")),
    "G2": lambda: stabilizer_algebra(model_g2_form(), "gl"),
    "Spin(7)": lambda: stabilizer_algebra(model_spin7_form(), "so"),
}


def _su_m(m):
    w = standard_symplectic(m)
    span = stabilizer_algebra(w, "so")
    j = w.as_matrix()
    keep = [x - np.sum(x * j) / np.sum(j * j) * j for x in span.basis]
    return span_of(keep, 2 * m, atol=1e-10, closed=True)


@pytest.fixture(scope="module")
def spans():
    return {k: f() for k, f in SPANS.items()}


@pytest.mark.parametrize("label", list(SPANS))
def test_berger_labels_of_model_algebras(spans, label):
    rep = berger_classify(spans[label])
    assert rep.verdict == label
    deciding = [e for e in rep.evidence if e.test.startswith("dim hol")][-1]
    assert deciding.passed


def test_quaternionic_triple_gives_sp_not_unitary(spans):
    # sp(2) sits inside su(4) inside u(4); the tree reports the smallest group
    rep = berger_classify(spans["Sp(2)"])
    assert rep.verdict == "Sp(2)" and rep.hol_dim == 10
    assert rep.invariants["commutant_skew"] == 3


def test_sp2sp1_from_quaternionic_four_form():
    phi = qk_4form(*model_hk_forms(2, "quaternionic"))
    stab = stabilizer_algebra(phi / phi.norm(), "so")
    assert stab.dim == 13
    rep = berger_classify(stab)
    assert rep.verdict == "Sp(2)Sp(1)"
    assert any("2m^2+m+3" in note for note in rep.notes)


@settings(max_examples=6)
@given(seed=st.integers(0, 2**31 - 1), label=st.sampled_from(["U(2)", "SU(3)", "Sp(1)", "G2"]))
def test_verdict_is_conjugation_invariant(seed, label):
    span = SPANS[label]()
    q = special_ortho_group.rvs(span.ambient_dim, random_state=np.random.default_rng(seed))
    assert berger_classify(_conjugate(span, q)).verdict == label


def test_reducible_input_is_rejected():
    blocks = []
    for x in so_basis(2):
        m = np.zeros((4, 4))
        m[:2, :2] = x
        blocks.append(m)
        m = np.zeros((4, 4))
        m[2:, 2:] = x
        blocks.append(m)
    span = span_of(blocks, 4, closed=True)
    split = detect_reducible(span)
    assert split is not None and split.label() == "Reducible(2+2)"
    with pytest.raises(ReducibleInputError):
        berger_classify(span)


def test_hk_triple_without_quaternionic_signs_is_reducible():
    for m, label in ((1, "Reducible(2+2)"), (2, "Reducible(4+4)")):
        stab = common_stabilizer(model_hk_forms(m, "all-plus"))
        split = detect_reducible(stab)
        assert split is not None and split.label() == label


def _so3_on_traceless_symmetric():
    """The irreducible 5-dimensional representation of so(3): X acts on S by [X, S]."""
    basis = []
    for i in range(3):
        for j in range(i, 3):
            e = np.zeros((3, 3))
            e[i, j] = e[j, i] = 1.0
            basis.append(e.ravel())
    basis = np.array(basis)
    basis = basis - np.outer(basis @ np.eye(3).ravel(), np.eye(3).ravel()) / 3.0
    q, _ = np.linalg.qr(basis.T)
    q = q[:, :5].T  # orthonormal rows spanning the traceless symmetric matrices
    mats = []
    for x in so_basis(3):
        act = np.array([(x @ s.reshape(3, 3) - s.reshape(3, 3) @ x).ravel() for s in q])
        mats.append(act @ q.T)
    return span_of(mats, 5, closed=True)


def test_irreducible_non_berger_algebra_is_undetermined():
    span = _so3_on_traceless_symmetric()
    assert span.dim == 3 and detect_reducible(span) is None
    rep = berger_classify(span)
    assert rep.verdict == "Undetermined"
    assert "no Berger branch matched" in rep.notes


def test_non_skew_input_is_refused():
    rng = np.random.default_rng(1)
    rep = berger_classify(span_of([rng.standard_normal((3, 3))], 3), check_reducible=False)
    assert rep.verdict == "Undetermined" and not rep.evidence[0].passed
    with pytest.raises(ClassificationError):
        berger_classify(span_of(so_basis(3), closed=True), n=4)


EXPECTED = {
    "flat-r3": ("Reducible(1+1+1)", True),
    "sphere-2": ("SO(2)", True),
    "sphere-4": ("SO(4)", True),
    "fubini-study-cp2": ("U(2)", True),
    "product(sphere-2,sphere-2)": ("Reducible(2+2)", True),
}


@pytest.mark.parametrize("ident", list(EXPECTED))
def test_pipeline_on_catalog(ident):
    rep, hol = classify(builtin(ident))
    verdict, sym = EXPECTED[ident]
    assert rep.verdict == verdict
    assert rep.symmetric is sym
    as_json = rep.as_dict()
    assert as_json["verdict"] == verdict and as_json["hol_dim"] == hol.dim


def test_pipeline_on_non_metric_connection():
    rep, hol = classify(builtin("hano-ozuki-r6"))
    assert rep.verdict == "Undetermined" and hol.dim == 5
    assert any("not metric" in note for note in rep.notes)


def test_symmetric_detection():
    assert detect_symmetric(builtin("sphere-4").metric).symmetric
    chart = Chart.box(3, -0.5, 0.5)
    g = MetricField.from_strings(chart, random_polynomial_metric_rows(3, np.random.default_rng(3), amp=0.3))
    verdict = detect_symmetric(g, points=[np.zeros(3), np.full(3, 0.2)])
    assert not verdict.symmetric and verdict.max_nabla_r > 1e-3


def test_unknown_method():
    with pytest.raises(ClassificationError):
        classify(builtin("flat-r3"), method="magic")
