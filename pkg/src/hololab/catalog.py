"""Built-in metrics and connections.

Every entry gives a single chart whose domain box avoids coordinate
singularities:

``flat-rn``            Cartesian coordinates on ``[-1, 1]^n``.
``sphere-2``           polar ``(theta, phi)``, ``theta`` in ``(0.25, pi - 0.25)`` (poles excluded),
                       ``phi`` in ``(-0.5, 2 pi + 0.5)`` so full latitude circles fit.
``sphere-n`` (n >= 3)  stereographic ``4 delta / (1 + |x|^2)^2`` on ``[-1, 1]^n``.
``hyperbolic-n``       Poincare ball ``4 delta / (1 - |x|^2)^2`` on ``[-0.5, 0.5]^n``.
``fubini-study-cp2``   affine chart ``z_j = x_j + i y_j`` (order ``x1, y1, x2, y2``) on ``[-1, 1]^4``.
``product(a,b)``       block-diagonal product of two catalog metrics.
``hano-ozuki-r6``      a torsion-free non-metric connection on ``[-1, 1]^6``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .chart import Chart, ChartError, ConnectionField, MetricField, product_metric


class CatalogError(ChartError):
    pass


@dataclass
class Manifold:
    """A chart carrying a metric or a connection plus optional extra structure."""

    name: str
    chart: Chart
    metric: MetricField | None = None
    connection: ConnectionField | None = None
    basepoint: np.ndarray | None = None
    forms: dict = field(default_factory=dict)
    complex_structure: object = None
    description: str = ""

    def __post_init__(self):
        if self.connection is None:
            if self.metric is None:
                raise CatalogError("a manifold needs a metric or a connection")
            self.connection = self.metric.levi_civita()
        if self.basepoint is None:
            self.basepoint = self.chart.center
        self.basepoint = np.asarray(self.basepoint, dtype=float)
        self.chart.require(self.basepoint)

    @property
    def dim(self):
        return self.chart.dim


def _diag(n, entry):
    return [[entry if i == j else "0" for j in range(n)] for i in range(n)]


def flat(n):
    chart = Chart.box(n)
    return Manifold(f"flat-r{n}", chart, MetricField.euclidean(chart), description="Euclidean space")


def sphere(n):
    if n < 2:
        raise CatalogError("sphere-n needs n >= 2")
    if n == 2:
        chart = Chart(2, (0.25, -0.5), (math.pi - 0.25, 2 * math.pi + 0.5), ("theta", "phi"))
        g = MetricField.from_strings(chart, [["1", "0"], ["0", "sin(theta)^2"]])
        return Manifold("sphere-2", chart, g, basepoint=[math.pi / 2, math.pi],
                        description="unit round 2-sphere, polar coordinates")
    chart = Chart.box(n)
    r2 = "+".join(f"x{i + 1}^2" for i in range(n))
    g = MetricField.from_strings(chart, _diag(n, f"4/(1+{r2})^2"))
    return Manifold(f"sphere-{n}", chart, g, description=f"unit round {n}-sphere, stereographic chart")


def hyperbolic(n):
    if n < 2:
        raise CatalogError("hyperbolic-n needs n >= 2")
    chart = Chart.box(n, -0.5, 0.5)
    r2 = "+".join(f"x{i + 1}^2" for i in range(n))
    g = MetricField.from_strings(chart, _diag(n, f"4/(1-({r2}))^2"))
    return Manifold(f"hyperbolic-{n}", chart, g, description=f"hyperbolic {n}-space, Poincare ball")


def fubini_study_cp2():
    """Fubini-Study metric from ``h_jk = (r delta_jk - conj(z_j) z_k) / r^2``, ``r = 1 + |z|^2``."""
    names = ("x1", "y1", "x2", "y2")
    chart = Chart.box(4, names=names)
    r = "(1+x1^2+y1^2+x2^2+y2^2)"
    x, y = ("x1", "x2"), ("y1", "y2")
    rows = [["0"] * 4 for _ in range(4)]
    for j in range(2):
        for k in range(2):
            delta = r if j == k else "0"
            re_part = f"({delta}-({x[j]}*{x[k]}+{y[j]}*{y[k]}))/{r}^2"
            im_part = f"(-({x[j]}*{y[k]}-{y[j]}*{x[k]}))/{r}^2"
            # real block over (x_j, y_j) x (x_k, y_k) is [[A, B], [-B, A]]
            rows[2 * j][2 * k] = re_part
            rows[2 * j + 1][2 * k + 1] = re_part
            rows[2 * j][2 * k + 1] = im_part
            rows[2 * j + 1][2 * k] = f"-({im_part})"
    g = MetricField.from_strings(chart, rows)
    jmat = np.zeros((4, 4))
    for j in range(2):
        jmat[2 * j + 1, 2 * j] = 1.0   # J d/dx_j = d/dy_j
        jmat[2 * j, 2 * j + 1] = -1.0
    return Manifold("fubini-study-cp2", chart, g, complex_structure=jmat,
                    description="complex projective plane, affine chart")


def hano_ozuki_r6():
    """Torsion-free connection on R^6 with 5-dimensional, non-compact holonomy algebra."""
    chart = Chart.box(6)
    s2 = "sqrt(2)"
    # gamma^a_{2b} for the connection matrix along d/dx2 (1-based indices)
    a2 = {(3, 4): "x1", (4, 3): "-x1", (5, 6): f"{s2}*x1", (6, 5): f"-{s2}*x1"}
    entries = []
    for (a, b), e in a2.items():
        entries.append((a, 2, b, e))
        entries.append((a, b, 2, e))  # gamma^a_{b2} = gamma^a_{2b}: torsion-free
    conn = ConnectionField.sparse(chart, entries)
    return Manifold("hano-ozuki-r6", chart, connection=conn,
                    description="torsion-free connection on R^6 (non-metric)")


_SIMPLE = {
    "fubini-study-cp2": fubini_study_cp2,
    "hano-ozuki-r6": hano_ozuki_r6,
}
_FAMILIES = {"flat-r": flat, "sphere-": sphere, "hyperbolic-": hyperbolic}

CATALOG_IDS = ("flat-rn", "sphere-n", "hyperbolic-n", "fubini-study-cp2", "product(a,b)", "hano-ozuki-r6")


def _split_product(body):
    depth = 0
    for k, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            return body[:k].strip(), body[k + 1:].strip()
    raise CatalogError(f"product needs two factors: product({body})")


def _family(ident, dim):
    for prefix, ctor in _FAMILIES.items():
        if not ident.startswith(prefix):
            continue
        tail = ident[len(prefix):]
        if tail == "n":
            if dim is None:
                raise CatalogError(f"{ident} needs a dimension")
            return ctor(dim)
        if re.fullmatch(r"\d+", tail):
            return ctor(int(tail))
    raise CatalogError(f"unknown catalog id {ident!r}")


def builtin(ident: str, dim: int | None = None) -> Manifold:
    """Instantiate a catalog entry.

    Family ids take the dimension either inline (``sphere-4``, ``flat-r3``) or
    from ``dim`` (``sphere-n`` with ``dim=4``).
    """
    ident = ident.strip()
    if ident in _SIMPLE:
        m = _SIMPLE[ident]()
    elif ident.startswith("product(") and ident.endswith(")"):
        a_id, b_id = _split_product(ident[len("product("):-1])
        a, b = builtin(a_id), builtin(b_id)
        if a.metric is None or b.metric is None:
            raise CatalogError("product factors must be metrics")
        g = product_metric(a.metric, b.metric)
        m = Manifold(f"product({a.name},{b.name})", g.chart, g,
                     basepoint=np.concatenate([a.basepoint, b.basepoint]),
                     description=f"Riemannian product of {a.name} and {b.name}")
    else:
        m = _family(ident, dim)
    if dim is not None and m.dim != dim:
        raise CatalogError(f"catalog entry {ident} has dimension {m.dim}, manifest says {dim}")
    return m


def catalog_listing():
    """``(id, dimension, description)`` rows for ``catalog list``."""
    return [
        ("flat-rn", "n >= 1", "Euclidean space, Cartesian chart [-1,1]^n"),
        ("sphere-n", "n >= 2", "unit round sphere; polar chart for n=2, stereographic otherwise"),
        ("hyperbolic-n", "n >= 2", "hyperbolic space, Poincare ball chart [-0.5,0.5]^n"),
        ("fubini-study-cp2", "4", "Fubini-Study metric, affine chart [-1,1]^4"),
        ("product(a,b)", "dim a + dim b", "Riemannian product of two catalog metrics"),
        ("hano-ozuki-r6", "6", "torsion-free non-metric connection with 5-dim holonomy"),
    ]
