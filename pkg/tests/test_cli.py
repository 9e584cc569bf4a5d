from __future__ import annotations

import json
from pathlib import Path

import pytest

from hololab.cli import EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION, main, run

MANIFESTS = Path(__file__).resolve().parent.parent / "manifests"


def _ok(argv):
    code, report, message, _ = run(argv)
    assert code == EXIT_OK, message
    return report


def _walk_numbers(obj, path=""):
    """Yield (path, dict) for every ``{"value", "tol"}`` leaf and fail on bare floats."""
    if isinstance(obj, dict):
        if set(obj) == {"value", "tol"}:
            yield path, obj
            return
        for k, v in obj.items():
            yield from _walk_numbers(v, f"{path}.{k}")
    elif isinstance(obj, list):
        for k, v in enumerate(obj):
            yield from _walk_numbers(v, f"{path}[{k}]")


def test_classify_sphere2():
    rep = _ok(["classify", "sphere-2"])
    cls = rep["stages"]["classification"]
    assert cls["verdict"] == "SO(2)" and cls["hol_dim"]["value"] == 1 and cls["symmetric"] is True
    assert rep["stages"]["decomposition"]["scalar"]["value"] == pytest.approx(2.0)
    assert rep["tool"]["name"] == "hololab" and rep["seed"] == 0x484F4C4F
    assert "timings" not in rep


def test_measured_numbers_carry_tolerances():
    rep = _ok(["classify", "fubini-study-cp2", "--method", "both"])
    leaves = list(_walk_numbers(rep["stages"]))
    assert len(leaves) > 10
    for path, leaf in leaves:
        assert isinstance(leaf["tol"], (int, float)), path
    assert rep["stages"]["classification"]["verdict"] == "U(2)"


def test_reports_are_byte_identical(tmp_path, capsys):
    outputs = []
    for k in range(2):
        target = tmp_path / f"r{k}.json"
        assert main(["classify", "product(sphere-2,sphere-2)", "--json", str(target)]) == EXIT_OK
        outputs.append(target.read_bytes())
        assert capsys.readouterr().out.encode() == outputs[-1]
    assert outputs[0] == outputs[1]
    assert json.loads(outputs[0])["stages"]["classification"]["verdict"] == "Reducible(2+2)"


def test_seed_changes_sample_points_only_through_flag():
    a = _ok(["classify", "sphere-2", "--seed", "7"])
    b = _ok(["classify", "sphere-2", "--seed", "0x7"])
    assert a == b and a["seed"] == 7


def test_timings_are_opt_in():
    rep = _ok(["classify", "flat-r3", "--timings"])
    assert {"christoffel", "holonomy (curvature span)"} <= set(rep["timings"])
    assert rep["stages"]["classification"]["verdict"] == "Reducible(1+1+1)"


def test_catalog_list():
    rep = _ok(["catalog", "list"])
    assert len(rep["manifolds"]) >= 6
    ids = {m["id"] for m in rep["homogeneous"]}
    assert {"cp2", "s5", "g2c4"} <= ids


def test_forms_check_g2_manifest():
    rep = _ok(["forms", "check", "--type", "g2", str(MANIFESTS / "flat-g2.yaml")])
    out = rep["stages"]["forms"]
    assert out["passed"] is True
    assert out["d_phi"]["value"] == 0.0 and out["dstar_phi"]["value"] == 0.0
    assert out["stabilizer_dim"]["value"] == 14


@pytest.mark.parametrize("kind, manifest", [("spin7", "flat-spin7.yaml"), ("hk", "flat-hk.yaml"),
                                            ("kahler", "cp2-kahler.yaml")])
def test_forms_check_other_types(kind, manifest):
    rep = _ok(["forms", "check", "--type", kind, str(MANIFESTS / manifest)])
    assert rep["stages"]["forms"]["passed"] is True


def test_transport_rectangle():
    rep = _ok(["transport", "sphere-2", "--loop", "axes=1,2", "eps=0.1"])
    out = rep["stages"]["transport"]
    # the rectangle encloses area eps^2 * (cos(pi/2) - cos(pi/2 + 0.1)) on the unit sphere
    assert out["rotation_angles"]["value"][0] == pytest.approx(0.1 * 0.0998334, rel=1e-5)


def test_decompose_and_homog():
    rep = _ok(["decompose", "sphere-4", "--point", "0.1,0.2,0,0"])
    assert rep["stages"]["decomposition"]["scalar"]["value"] == pytest.approx(12.0)
    hom = _ok(["homog", "--check", "holonomy", "g2c4"])["stages"]["homog"]
    assert hom["hol_dim"]["value"] == 7 and hom["mm_spans_h"] is True
    tor = _ok(["homog", "--check", "torsion", "s5"])["stages"]["homog"]
    assert tor["symmetric"] is False and tor["torsion_norm"]["value"] > 0
    lie = _ok(["homog", "--check", "symmetric", str(MANIFESTS / "su2-over-u1.yaml")])
    assert lie["stages"]["homog"]["symmetric"] is True


@pytest.mark.parametrize("argv", [
    ["classify", "no-such-manifold"],
    ["classify", str(MANIFESTS / "missing.yaml")],
    ["transport", "sphere-2", "--loop", "axes=1,1", "eps=0.1"],
    ["transport", "sphere-2", "--loop", "eps=0.1"],
    ["transport", "hyperbolic-3", "--loop", "axes=1,2", "eps=0.9"],
    ["decompose", "sphere-4", "--point", "1,1,1,1"],
    ["forms", "check", "--type", "g2", "sphere-2"],
    ["homog", "--check", "holonomy", "s5"],
    ["classify", str(MANIFESTS / "su2-over-u1.yaml")],
    ["bogus"],
])
def test_validation_errors_exit_2(argv):
    code, report, message, _ = run(argv)
    assert code == EXIT_VALIDATION and report is None


def test_numeric_failure_exits_3(capsys):
    code = main(["classify", "sphere-2", "--method", "loop", "--eps-schedule", "1.2,1.0,0.8"])
    assert code == EXIT_NUMERIC
    assert "too far from the identity" in capsys.readouterr().err


def test_manifest_diagnostic_reaches_stderr(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("format: 1\nname: x\ndim: 2\ndomain: [[0, 1], [0, 1]]\nmetric: [[\"1\", \"0\"], [\"0\", \"1\"]]\n"
                   "wobble: 3\n")
    assert main(["classify", str(bad)]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "line 6" in err and "wobble" in err
