from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from hololab.catalog import builtin
from hololab.chart import christoffel
from hololab.homogeneous import ReductiveSplit, symmetric_holonomy
from hololab.manifest import ManifestError, load, load_text

MANIFESTS = Path(__file__).resolve().parent.parent / "manifests"

ROUND_S2 = """\
format: 1
name: s2
dim: 2
coordinates: [theta, phi]
domain: [[0.3, 2.8], [0, 6]]
metric:
  - ["1", "0"]
  - ["0", "sin(theta)^2"]
"""


@pytest.mark.parametrize("path", sorted(MANIFESTS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_manifests_load(path):
    obj = load(path)
    assert obj is not None


def test_round_sphere_manifest_matches_catalog():
    m = load_text(ROUND_S2)
    s2 = builtin("sphere-2")
    p = np.array([1.1, 0.7])
    np.testing.assert_allclose(christoffel(m.metric, p), christoffel(s2.metric, p), atol=1e-14)
    np.testing.assert_allclose(m.basepoint, [1.55, 3.0])
    assert m.chart.names == ("theta", "phi")


def test_connection_manifest_matches_catalog_entry():
    m = load(MANIFESTS / "hano-ozuki.yaml")
    ref = builtin("hano-ozuki-r6")
    rng = np.random.default_rng(0)
    for p in rng.uniform(-0.8, 0.8, size=(5, 6)):
        np.testing.assert_allclose(m.connection.gamma(p), ref.connection.gamma(p), atol=1e-14)
    assert m.metric is None


def test_forms_and_builtin_manifests():
    g2 = load(MANIFESTS / "flat-g2.yaml")
    phi = g2.forms["phi"]
    assert phi.degree == 3 and len(phi.components) == 7
    cp2 = load(MANIFESTS / "cp2-kahler.yaml")
    assert cp2.complex_structure is not None and cp2.dim == 4


def test_lie_manifest():
    split = load(MANIFESTS / "su2-over-u1.yaml")
    assert isinstance(split, ReductiveSplit)
    assert split.h == (2,) and split.m == (0, 1)
    assert symmetric_holonomy(split).dim == 1


def _error(text):
    with pytest.raises(ManifestError) as info:
        load_text(text)
    return info.value


def test_unknown_key_reports_line_and_field():
    err = _error(ROUND_S2 + "colour: blue\n")
    assert err.line == 9 and err.field == "colour"
    assert "line 9" in str(err) and "unknown key" in str(err)


def test_format_version_is_required():
    assert "format" in str(_error(ROUND_S2.replace("format: 1\n", "")))
    err = _error(ROUND_S2.replace("format: 1", "format: 2"))
    assert err.line == 1 and "unsupported format" in str(err)


def test_bad_expression_is_located():
    err = _error(ROUND_S2.replace("sin(theta)^2", "sin(theta^2"))
    assert err.line == 8 and err.field.startswith("metric")


def test_unknown_variable_is_rejected():
    err = _error(ROUND_S2.replace("sin(theta)^2", "sin(psi)^2"))
    assert err.line == 8


def test_degenerate_and_domain_errors():
    assert "lo < hi" in str(_error(ROUND_S2.replace("[0, 6]", "[6, 0]")))
    err = _error(ROUND_S2 + "basepoint: [0.1, 1.0]\n")
    assert err.field == "basepoint"
    with pytest.raises(ManifestError):
        load_text(ROUND_S2.replace('"sin(theta)^2"', '"0"'))


def test_duplicate_keys_and_entries():
    err = _error(ROUND_S2 + "dim: 3\n")
    assert "duplicate key" in str(err) and err.line == 9
    text = (MANIFESTS / "hano-ozuki.yaml").read_text()
    dup = text.replace('  - {k: 3, i: 4, j: 2, expr: "x1"}', '  - {k: 3, i: 2, j: 4, expr: "x1"}')
    assert "duplicate Christoffel entry" in str(_error(dup))


def test_structural_errors():
    assert "mapping" in str(_error("- 1\n- 2\n"))
    assert "malformed YAML" in str(_error("format: [1\n"))
    err = _error("format: 1\ndim: 2\ndomain: [[0, 1], [0, 1]]\n")
    assert "exactly one of" in str(err)
    err = _error("format: 1\nbuiltin: sphere-2\ncoordinates: [a, b]\n")
    assert "builtin" in str(err) and err.field == "coordinates"
    err = _error(ROUND_S2.replace("dim: 2", "dim: two"))
    assert err.field == "dim"


def test_lie_manifest_errors():
    text = (MANIFESTS / "su2-over-u1.yaml").read_text()
    extra = "  - {k: 1, i: 1, j: 2, value: 1}\n"  # [e1, e2] = e3 + e1 breaks Jacobi
    bad = text.replace("h_indices:", extra + "h_indices:")
    assert "Jacobi" in str(_error(bad))
    assert "partition" in str(_error(text.replace("m_indices: [1, 2]", "m_indices: [1]")
                                     .replace("inner_product: [[1, 0], [0, 1]]", "inner_product: [[1]]")))
    assert "index" in str(_error(text.replace("h_indices: [3]", "h_indices: [4]")))


def test_missing_file():
    with pytest.raises(ManifestError):
        load(MANIFESTS / "does-not-exist.yaml")
