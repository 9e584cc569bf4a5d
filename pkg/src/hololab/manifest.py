"""YAML manifests for manifolds and Lie-algebra models.

Manifests are 1-based (indices of coordinates, Christoffel symbols, form
components and structure constants); the Python API is 0-based.  Unknown keys
are rejected and every error names the line and field that caused it.

Manifold manifest::

    format: 1
    name: round-s2
    dim: 2
    coordinates: [theta, phi]
    domain: [[0.3, 2.8], [-0.5, 6.8]]
    metric: [["1", "0"], ["0", "sin(theta)^2"]]
    basepoint: [1.5707963, 3.14159]

Exactly one of ``builtin``, ``metric`` or ``connection`` is required.

Lie-algebra manifest::

    format: 1
    name: su2-over-u1
    dim: 3
    structure_constants: [{k: 3, i: 1, j: 2, value: 1}, ...]
    h_indices: [3]
    m_indices: [1, 2]
    inner_product: [[1, 0], [0, 1]]
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .catalog import CatalogError, Manifold, builtin
from .chart import Chart, ChartError, ConnectionField, MetricField
from .expr import ExprError
from .gstructures import AlmostComplexField, FormField
from .homogeneous import HomogeneousError, LieAlgebraData, ReductiveSplit

FORMAT_VERSION = 1

MANIFOLD_KEYS = {"format", "name", "description", "dim", "coordinates", "domain", "builtin", "metric",
                 "connection", "basepoint", "forms", "complex_structure"}
LIE_KEYS = {"format", "name", "description", "dim", "labels", "structure_constants", "h_indices", "m_indices",
            "inner_product"}


class ManifestError(ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class _Map(dict):
    line = None
    key_lines: dict


class _Seq(list):
    line = None
    item_lines: list


class _Loader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    out = _Map()
    out.line = node.start_mark.line + 1
    out.key_lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        if key in out:
            raise ManifestError(f"duplicate key {key!r}", key_node.start_mark.line + 1, str(key))
        out[key] = loader.construct_object(value_node, deep=True)
        out.key_lines[key] = value_node.start_mark.line + 1
    return out


def _construct_seq(loader, node):
    out = _Seq(loader.construct_object(child, deep=True) for child in node.value)
    out.line = node.start_mark.line + 1
    out.item_lines = [child.start_mark.line + 1 for child in node.value]
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)
_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_SEQUENCE_TAG, _construct_seq)


class _Ctx:
    """Field path plus the best known line number, for diagnostics."""

    def __init__(self, field="", line=None):
        self.field = field
        self.line = line

    def key(self, mapping, key):
        line = getattr(mapping, "key_lines", {}).get(key, getattr(mapping, "line", self.line))
        return _Ctx(f"{self.field}.{key}" if self.field else str(key), line)

    def item(self, seq, k):
        lines = getattr(seq, "item_lines", None)
        line = lines[k] if lines and k < len(lines) else getattr(seq, "line", self.line)
        return _Ctx(f"{self.field}[{k + 1}]", line)

    def fail(self, message):
        raise ManifestError(message, self.line, self.field)


def _load_yaml(text):
    try:
        data = yaml.load(text, Loader=_Loader)
    except ManifestError:
        raise
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ManifestError(f"malformed YAML: {exc.problem}", line) from None
    except yaml.YAMLError as exc:
        raise ManifestError(f"malformed YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a mapping", 1)
    return data


def _check_keys(data, allowed, ctx):
    for key in data:
        if key not in allowed:
            ctx.key(data, key).fail(f"unknown key (allowed: {', '.join(sorted(allowed))})")
    c = ctx.key(data, "format")
    if "format" not in data:
        _Ctx("format", getattr(data, "line", 1)).fail("missing 'format' (expected 1)")
    if data["format"] != FORMAT_VERSION:
        c.fail(f"unsupported format {data['format']!r} (expected {FORMAT_VERSION})")


def _int(value, ctx, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        ctx.fail("expected an integer")
    if lo is not None and value < lo:
        ctx.fail(f"expected an integer >= {lo}")
    return value


def _number(value, ctx):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        ctx.fail("expected a number")
    return float(value)


def _seq(value, ctx, length=None):
    if not isinstance(value, list):
        ctx.fail("expected a list")
    if length is not None and len(value) != length:
        ctx.fail(f"expected {length} entries, got {len(value)}")
    return value


def _expr_text(value, ctx):
    if isinstance(value, bool):
        ctx.fail("expected an expression")
    if isinstance(value, (int, float)):
        return repr(value)
    if not isinstance(value, str):
        ctx.fail("expected an expression string")
    return value


def _parse_in(chart, value, ctx):
    text = _expr_text(value, ctx)
    try:
        return chart.parse(text)
    except ExprError as exc:
        ctx.fail(f"cannot parse expression {text!r}: {exc}")


def _matrix_exprs(chart, value, ctx):
    n = chart.dim
    rows = _seq(value, ctx, n)
    out = []
    for i, row in enumerate(rows):
        rc = ctx.item(rows, i)
        row = _seq(row, rc, n)
        out.append([_parse_in(chart, e, rc.item(row, j)) for j, e in enumerate(row)])
    return out


def _sparse_entry(entry, ctx, keys):
    if not isinstance(entry, dict):
        ctx.fail(f"expected a mapping with keys {', '.join(keys)}")
    for key in entry:
        if key not in keys:
            ctx.key(entry, key).fail(f"unknown key (allowed: {', '.join(keys)})")
    for key in keys:
        if key not in entry:
            ctx.fail(f"missing '{key}'")
    return entry


def _index(value, ctx, n):
    v = _int(value, ctx, 1)
    if v > n:
        ctx.fail(f"index {v} exceeds dimension {n}")
    return v


def _chart(data, ctx):
    if "dim" not in data:
        ctx.fail("missing 'dim'")
    n = _int(data["dim"], ctx.key(data, "dim"), 1)
    names = ()
    if "coordinates" in data:
        c = ctx.key(data, "coordinates")
        names = tuple(_seq(data["coordinates"], c, n))
        for k, nm in enumerate(names):
            if not isinstance(nm, str) or not nm.isidentifier():
                c.item(data["coordinates"], k).fail("coordinate names must be identifiers")
    if "domain" not in data:
        ctx.fail("missing 'domain' (a list of [lo, hi] pairs)")
    c = ctx.key(data, "domain")
    dom = _seq(data["domain"], c, n)
    lo, hi = [], []
    for k, pair in enumerate(dom):
        pc = c.item(dom, k)
        pair = _seq(pair, pc, 2)
        a, b = _number(pair[0], pc), _number(pair[1], pc)
        if not a < b:
            pc.fail("domain interval needs lo < hi")
        lo.append(a)
        hi.append(b)
    try:
        return Chart(n, tuple(lo), tuple(hi), names)
    except ChartError as exc:
        ctx.fail(str(exc))


def _forms(chart, value, ctx):
    out = {}
    items = _seq(value, ctx)
    for k, entry in enumerate(items):
        ec = ctx.item(items, k)
        if not isinstance(entry, dict):
            ec.fail("expected a mapping with 'degree' and 'components'")
        for key in entry:
            if key not in ("name", "degree", "components"):
                ec.key(entry, key).fail("unknown key (allowed: components, degree, name)")
        if "degree" not in entry or "components" not in entry:
            ec.fail("a form needs 'degree' and 'components'")
        degree = _int(entry["degree"], ec.key(entry, "degree"), 0)
        if degree > chart.dim:
            ec.key(entry, "degree").fail(f"degree exceeds dimension {chart.dim}")
        name = entry.get("name", f"form{k + 1}")
        if not isinstance(name, str):
            ec.key(entry, "name").fail("expected a string")
        if name in out:
            ec.key(entry, "name").fail(f"duplicate form name {name!r}")
        cc = ec.key(entry, "components")
        comps = _seq(entry["components"], cc)
        entries = []
        for m, comp in enumerate(comps):
            mc = cc.item(comps, m)
            comp = _sparse_entry(comp, mc, ("indices", "expr"))
            ic = mc.key(comp, "indices")
            idx = _seq(comp["indices"], ic, degree)
            idx = tuple(_index(v, ic, chart.dim) for v in idx)
            if len(set(idx)) != len(idx):
                ic.fail("repeated index in a form component")
            entries.append((tuple(i - 1 for i in idx), _parse_in(chart, comp["expr"], mc.key(comp, "expr"))))
        try:
            out[name] = FormField.sparse(chart, degree, entries, one_based=False)
        except ValueError as exc:
            ec.fail(str(exc))
    return out


def manifold_from_dict(data, source="<manifest>") -> Manifold:
    ctx = _Ctx("", getattr(data, "line", 1))
    _check_keys(data, MANIFOLD_KEYS, ctx)
    name = data.get("name", Path(source).stem)
    if not isinstance(name, str):
        ctx.key(data, "name").fail("expected a string")
    kinds = [k for k in ("builtin", "metric", "connection") if k in data]
    if len(kinds) != 1:
        ctx.fail("exactly one of 'builtin', 'metric' or 'connection' is required")
    kind = kinds[0]
    if kind == "builtin":
        for key in ("coordinates", "domain"):
            if key in data:
                ctx.key(data, key).fail("not allowed together with 'builtin'")
        bc = ctx.key(data, "builtin")
        if not isinstance(data["builtin"], str):
            bc.fail("expected a catalog id")
        try:
            base = builtin(data["builtin"], data.get("dim"))
        except (CatalogError, ChartError) as exc:
            bc.fail(str(exc))
        if "dim" in data and _int(data["dim"], ctx.key(data, "dim"), 1) != base.dim:
            ctx.key(data, "dim").fail(f"catalog entry has dimension {base.dim}")
        chart, metric, conn = base.chart, base.metric, base.connection
        forms, jf = dict(base.forms), base.complex_structure
        basepoint = base.basepoint
    else:
        chart = _chart(data, ctx)
        metric = conn = None
        forms, jf, basepoint = {}, None, None
        c = ctx.key(data, kind)
        if kind == "metric":
            comps = _matrix_exprs(chart, data["metric"], c)
            try:
                metric = MetricField(chart, comps)
            except ChartError as exc:
                c.fail(str(exc))
        else:
            items = _seq(data["connection"], c)
            entries = []
            for k, entry in enumerate(items):
                ec = c.item(items, k)
                entry = _sparse_entry(entry, ec, ("k", "i", "j", "expr"))
                kij = [_index(entry[key], ec.key(entry, key), chart.dim) for key in ("k", "i", "j")]
                if any(tuple(kij) == tuple(e[:3]) for e in entries):
                    ec.fail(f"duplicate Christoffel entry {tuple(kij)}")
                entries.append((*kij, _parse_in(chart, entry["expr"], ec.key(entry, "expr"))))
            conn = ConnectionField.sparse(chart, entries, one_based=True)
    if "basepoint" in data:
        c = ctx.key(data, "basepoint")
        bp = _seq(data["basepoint"], c, chart.dim)
        basepoint = np.array([_number(v, c.item(bp, k)) for k, v in enumerate(bp)])
        if not chart.contains(basepoint):
            c.fail("basepoint lies outside the domain")
    if "forms" in data:
        forms.update(_forms(chart, data["forms"], ctx.key(data, "forms")))
    if "complex_structure" in data:
        c = ctx.key(data, "complex_structure")
        comps = _matrix_exprs(chart, data["complex_structure"], c)
        try:
            jf = AlmostComplexField(chart, comps)
        except ValueError as exc:
            c.fail(str(exc))
    desc = data.get("description", "")
    try:
        return Manifold(name, chart, metric, conn, basepoint, forms, jf, str(desc))
    except ChartError as exc:
        ctx.fail(str(exc))


def lie_from_dict(data, source="<manifest>") -> ReductiveSplit:
    ctx = _Ctx("", getattr(data, "line", 1))
    _check_keys(data, LIE_KEYS, ctx)
    for key in ("dim", "structure_constants", "h_indices", "m_indices"):
        if key not in data:
            ctx.fail(f"missing '{key}'")
    n = _int(data["dim"], ctx.key(data, "dim"), 1)
    c = ctx.key(data, "structure_constants")
    items = _seq(data["structure_constants"], c)
    entries = []
    for k, entry in enumerate(items):
        ec = c.item(items, k)
        entry = _sparse_entry(entry, ec, ("k", "i", "j", "value"))
        kij = [_index(entry[key], ec.key(entry, key), n) for key in ("k", "i", "j")]
        entries.append((*kij, _number(entry["value"], ec.key(entry, "value"))))
    labels = ()
    if "labels" in data:
        labels = tuple(str(s) for s in _seq(data["labels"], ctx.key(data, "labels"), n))
    try:
        alg = LieAlgebraData.from_sparse(n, entries)
        alg = LieAlgebraData(n, alg.c, labels)
    except HomogeneousError as exc:
        c.fail(str(exc))
    jac = alg.jacobi_defect()
    if jac > 1e-10:
        c.fail(f"structure constants violate the Jacobi identity (defect {jac:.2e})")
    idx = {}
    for key in ("h_indices", "m_indices"):
        kc = ctx.key(data, key)
        vals = _seq(data[key], kc)
        idx[key] = tuple(_index(v, kc.item(vals, k), n) - 1 for k, v in enumerate(vals))
    mdim = len(idx["m_indices"])
    if "inner_product" in data:
        ic = ctx.key(data, "inner_product")
        rows = _seq(data["inner_product"], ic, mdim)
        inner = np.array([[_number(v, ic.item(rows, i)) for v in _seq(r, ic.item(rows, i), mdim)]
                          for i, r in enumerate(rows)])
    else:
        inner = np.eye(mdim)
    name = data.get("name", Path(source).stem)
    try:
        return ReductiveSplit(alg, idx["h_indices"], idx["m_indices"], inner, str(name))
    except HomogeneousError as exc:
        ctx.fail(str(exc))


def is_lie_manifest(data) -> bool:
    return "structure_constants" in data


def load_text(text, source="<manifest>"):
    """Parse manifest text into a :class:`Manifold` or a :class:`ReductiveSplit`."""
    data = _load_yaml(text)
    if is_lie_manifest(data):
        return lie_from_dict(data, source)
    return manifold_from_dict(data, source)


def load(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {str(path)!r}: {exc.strerror}") from None
    return load_text(text, str(path))
