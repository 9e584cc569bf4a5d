"""Reductive homogeneous spaces ``G/H`` from structure constants.

Curvature, canonical torsion and holonomy of symmetric spaces come straight
from brackets: no charts and no ODEs.  Structure constants are stored densely
as ``c[k, i, j]`` with ``[e_i, e_j] = sum_k c[k, i, j] e_k``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .algebra import MatrixAlgebraSpan, span_closure, span_of

MAX_DENSE_DIM = 36


class HomogeneousError(ValueError):
    pass


class NotSymmetricError(HomogeneousError):
    pass


@dataclass(frozen=True)
class LieAlgebraData:
    dim: int
    c: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.shape != (self.dim,) * 3:
            raise HomogeneousError("structure constants must have shape (dim, dim, dim)")
        if self.dim > MAX_DENSE_DIM:
            raise HomogeneousError(f"dense storage supports dim <= {MAX_DENSE_DIM}")
        if np.abs(c + c.transpose(0, 2, 1)).max(initial=0.0) > 1e-12:
            raise HomogeneousError("structure constants are not antisymmetric")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        labels = tuple(self.labels) or tuple(f"e{i + 1}" for i in range(self.dim))
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_matrices(cls, mats, labels=()):
        """Structure constants of the span of linearly independent matrices."""
        mats = np.asarray(mats)
        d = len(mats)
        flat = mats.reshape(d, -1)
        if np.iscomplexobj(flat):
            flat = np.concatenate([flat.real, flat.imag], axis=1)
        if np.linalg.matrix_rank(flat) < d:
            raise HomogeneousError("generators are linearly dependent")
        c = np.zeros((d, d, d))
        for i, j in itertools.combinations(range(d), 2):
            br = mats[i] @ mats[j] - mats[j] @ mats[i]
            rhs = br.reshape(-1)
            if np.iscomplexobj(rhs) or np.iscomplexobj(mats):
                rhs = np.concatenate([np.real(rhs), np.imag(rhs)])
            coef, *_ = np.linalg.lstsq(flat.T, rhs, rcond=None)
            if np.abs(flat.T @ coef - rhs).max() > 1e-10:
                raise HomogeneousError("generators do not span a Lie algebra")
            coef[np.abs(coef) < 1e-14] = 0.0
            c[:, i, j] = coef
            c[:, j, i] = -coef
        return cls(d, c, labels)

    @classmethod
    def from_sparse(cls, dim, entries, one_based=True):
        """From ``[(k, i, j, value), ...]``; ``c[k, j, i] = -value`` is implied."""
        off = 1 if one_based else 0
        c = np.zeros((dim, dim, dim))
        seen = {}
        for k, i, j, v in entries:
            k, i, j = int(k) - off, int(i) - off, int(j) - off
            if not all(0 <= t < dim for t in (k, i, j)):
                raise HomogeneousError(f"structure constant index {(k + off, i + off, j + off)} out of range")
            if i == j and v != 0:
                raise HomogeneousError("c^k_ii must vanish")
            for key, val in (((k, i, j), v), ((k, j, i), -v)):
                if key in seen and abs(seen[key] - val) > 1e-12:
                    raise HomogeneousError(f"conflicting structure constants at {tuple(t + off for t in key)}")
                seen[key] = val
                c[key] = val
        return cls(dim, c)

    def bracket(self, x, y):
        return np.einsum("kij,i,j->k", self.c, np.asarray(x, float), np.asarray(y, float))

    def ad(self, x):
        """Matrix of ``ad(x)``: ``ad(x)[k, j] = sum_i x_i c[k, i, j]``."""
        return np.einsum("kij,i->kj", self.c, np.asarray(x, float))

    def jacobi_defect(self):
        c = self.c
        # [[e_i, e_j], e_l] + cyclic
        t = np.einsum("mij,kml->kijl", c, c)
        cyc = t + t.transpose(0, 2, 3, 1) + t.transpose(0, 3, 1, 2)
        return float(np.abs(cyc).max(initial=0.0))

    def killing(self):
        ads = np.einsum("kij->ikj", self.c)  # ads[i] = ad(e_i)
        return np.einsum("akj,bjk->ab", ads, ads)


@dataclass(frozen=True)
class ReductiveSplit:
    algebra: LieAlgebraData
    h: tuple
    m: tuple
    inner: np.ndarray
    name: str = ""
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        h, m = tuple(int(i) for i in self.h), tuple(int(i) for i in self.m)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "m", m)
        d = self.algebra.dim
        if sorted(h + m) != list(range(d)):
            raise HomogeneousError("h and m indices must partition the basis")
        inner = np.asarray(self.inner, dtype=float)
        if inner.shape != (len(m), len(m)):
            raise HomogeneousError("inner product must be an |m| x |m| matrix")
        if len(m) and (np.abs(inner - inner.T).max() > 1e-12 or np.linalg.eigvalsh(inner).min() <= 0):
            raise HomogeneousError("inner product on m must be symmetric positive-definite")
        object.__setattr__(self, "inner", inner)
        c = self.algebra.c
        if h and m:
            hh = np.abs(c[np.ix_(m, h, h)]).max(initial=0.0)
            hm = np.abs(c[np.ix_(h, h, m)]).max(initial=0.0)
            if hh > 1e-12:
                raise HomogeneousError(f"[h, h] is not contained in h (defect {hh:.2e})")
            if hm > 1e-12:
                raise HomogeneousError(f"[h, m] is not contained in m (defect {hm:.2e})")
        iso = self.isotropy_matrices()
        inv = max((np.abs(a.T @ inner + inner @ a).max() for a in iso), default=0.0)
        if inv > 1e-10:
            raise HomogeneousError(f"inner product is not ad(h)-invariant (defect {inv:.2e})")

    def isotropy_matrices(self):
        c = self.algebra.c
        return [c[np.ix_(self.m, [a], self.m)][:, 0, :] for a in self.h]

    def orthonormal_frame(self):
        """``F`` with ``F^T inner F = I`` (Cholesky)."""
        if not self.m:
            return np.zeros((0, 0))
        chol = np.linalg.cholesky(self.inner)
        return np.linalg.inv(chol).T


def check_symmetric(split: ReductiveSplit, tol=1e-12):
    """``([m, m] in h, defect)`` with defect the largest m-component of an ``[m, m]`` bracket."""
    m = list(split.m)
    defect = float(np.abs(split.algebra.c[np.ix_(m, m, m)]).max(initial=0.0))
    return defect <= tol, defect


def _require_symmetric(split):
    ok, defect = check_symmetric(split)
    if not ok:
        raise NotSymmetricError(f"split is not symmetric ([m, m] has m-component {defect:.2e})")


def symmetric_curvature(split: ReductiveSplit, x, y):
    """``-[X, Y]`` (h-coefficients) for m-vectors ``X, Y`` given in the m-basis."""
    _require_symmetric(split)
    c = split.algebra.c
    m, h = list(split.m), list(split.h)
    return -np.einsum("kij,i,j->k", c[np.ix_(h, m, m)], np.asarray(x, float), np.asarray(y, float))


def curvature_endomorphism(split: ReductiveSplit, x, y):
    """``R(X, Y) = -ad([X, Y])`` restricted to m (m-basis matrix)."""
    z = symmetric_curvature(split, x, y)
    iso = split.isotropy_matrices()
    return sum(zk * a for zk, a in zip(z, iso)) if iso else np.zeros((len(split.m),) * 2)


def isotropy_representation(split: ReductiveSplit, orthonormal=True):
    """``ad(h)|_m`` as matrices; in an inner-product-orthonormal basis of m by default."""
    iso = split.isotropy_matrices()
    if not orthonormal or not iso:
        return iso
    f = split.orthonormal_frame()
    finv = np.linalg.inv(f)
    return [finv @ a @ f for a in iso]


def symmetric_holonomy(split: ReductiveSplit, tol=1e-10) -> MatrixAlgebraSpan:
    """Span of ``ad([X_a, X_b])|_m`` over m-basis pairs, in an orthonormal basis of m."""
    _require_symmetric(split)
    n = len(split.m)
    if n == 0:
        return span_of([], 0)
    f = split.orthonormal_frame()
    finv = np.linalg.inv(f)
    gens = []
    for a, b in itertools.combinations(range(n), 2):
        ea, eb = np.eye(n)[a], np.eye(n)[b]
        gens.append(finv @ curvature_endomorphism(split, ea, eb) @ f)
    # [m, m] is already a subalgebra for symmetric splits; closure is a check.
    return span_closure(gens, tol=tol, atol=1e-12, n=n)


def canonical_torsion(split: ReductiveSplit):
    """``T(X_p, X_q) = -[X_p, X_q]_m`` as an array ``T[r, p, q]`` on the m-basis."""
    m = list(split.m)
    return -np.asarray(split.algebra.c[np.ix_(m, m, m)])


# ---------------------------------------------------------------------------
# Catalog models
# ---------------------------------------------------------------------------

def _skew(n, i, j):
    a = np.zeros((n, n))
    a[i, j], a[j, i] = 1.0, -1.0
    return a


def _model(mats, labels, h, m, name, scale=None, inner=None):
    alg = LieAlgebraData.from_matrices(mats, labels)
    if inner is None:
        kill = alg.killing()[np.ix_(m, m)]
        if np.abs(kill).max(initial=0.0) < 1e-14:
            inner = np.eye(len(m))
            scale = 1.0
        else:
            scale = 1.0 if scale is None else scale
            inner = -scale * kill
    inner = 0.5 * (inner + np.asarray(inner).T)
    return ReductiveSplit(alg, tuple(h), tuple(m), inner, name, scale if scale is not None else 1.0)


def sphere_model(n: int) -> ReductiveSplit:
    """``so(n+1) / so(n)`` with ``<X, Y> = -tr(XY)/2`` (unit sphere; ``-B`` scaled by ``1/(2(n-1))``)."""
    if n < 2:
        raise HomogeneousError("sphere model needs n >= 2")
    big = n + 1
    pairs = list(itertools.combinations(range(big), 2))
    mats = [_skew(big, i, j) for i, j in pairs]
    labels = [f"E{i + 1}{j + 1}" for i, j in pairs]
    h = [k for k, (i, j) in enumerate(pairs) if j < n]
    m = [k for k, (i, j) in enumerate(pairs) if j == n]
    return _model(mats, labels, h, m, f"so({big})/so({n})", scale=1.0 / (2 * (n - 1)))


def _su_basis(n):
    mats, labels = [], []
    for p, q in itertools.combinations(range(n), 2):
        a = np.zeros((n, n), dtype=complex)
        a[p, q], a[q, p] = 1.0, -1.0
        mats.append(a)
        labels.append(f"A{p + 1}{q + 1}")
        s = np.zeros((n, n), dtype=complex)
        s[p, q] = s[q, p] = 1j
        mats.append(s)
        labels.append(f"S{p + 1}{q + 1}")
    for k in range(1, n):
        d = np.zeros(n, dtype=complex)
        d[:k] = 1j
        d[k] = -1j * k
        mats.append(np.diag(d) / np.sqrt(k * (k + 1) / 2))
        labels.append(f"D{k}")
    return mats, labels


def _block_split(n, blocks, extra_h_diag=()):
    """h = block-diagonal generators of su(n) for the given index blocks."""
    mats, labels = _su_basis(n)
    block_of = {}
    for b, idx in enumerate(blocks):
        for i in idx:
            block_of[i] = b
    h, m = [], []
    for k, (mat, lab) in enumerate(zip(mats, labels)):
        if lab[0] in "AS":
            p, q = int(lab[1]) - 1, int(lab[2]) - 1
            (h if block_of.get(p, -1) == block_of.get(q, -2) else m).append(k)
        else:
            (h if lab in extra_h_diag else m).append(k)
    return mats, labels, h, m


def cp2_model() -> ReductiveSplit:
    """``su(3) / s(u(2) + u(1))``."""
    mats, labels, h, m = _block_split(3, [(0, 1), (2,)], extra_h_diag=("D1", "D2"))
    return _model(mats, labels, h, m, "su(3)/s(u(2)+u(1))")


def s5_model() -> ReductiveSplit:
    """``su(3) / su(2)``: reductive but not symmetric."""
    mats, labels, h, m = _block_split(3, [(0, 1), (2,)], extra_h_diag=("D1",))
    return _model(mats, labels, h, m, "su(3)/su(2)")


def grassmannian_g2c4_model() -> ReductiveSplit:
    """``su(4) / s(u(2) + u(2))``, the Grassmannian of 2-planes in ``C^4``."""
    mats, labels = _su_basis(4)
    # swap in a diagonal basis adapted to the blocks: D1 (block 1), diag(1,1,-1,-1), diag(0,0,1,-1)
    d_blocks = [np.diag([1j, -1j, 0, 0]) / np.sqrt(1.0), np.diag([1j, 1j, -1j, -1j]) / np.sqrt(2.0),
                np.diag([0, 0, 1j, -1j]) / np.sqrt(1.0)]
    mats = [mm for mm, lab in zip(mats, labels) if lab[0] != "D"] + d_blocks
    labels = [lab for lab in labels if lab[0] != "D"] + ["H1", "Z", "H2"]
    h, m = [], []
    for k, lab in enumerate(labels):
        if lab[0] in "AS":
            p, q = int(lab[1]) - 1, int(lab[2]) - 1
            (h if (p < 2) == (q < 2) else m).append(k)
        else:
            h.append(k)
    return _model(mats, labels, h, m, "su(4)/s(u(2)+u(2))")


def torus_model(n: int) -> ReductiveSplit:
    """Abelian ``R^n`` with ``h = 0``: the flat torus."""
    alg = LieAlgebraData(n, np.zeros((n, n, n)))
    return ReductiveSplit(alg, (), tuple(range(n)), np.eye(n), f"t^{n}")


HOMOGENEOUS_CATALOG = {
    "sphere-2": lambda: sphere_model(2),
    "sphere-3": lambda: sphere_model(3),
    "sphere-4": lambda: sphere_model(4),
    "cp2": cp2_model,
    "s5": s5_model,
    "g2c4": grassmannian_g2c4_model,
    "torus-2": lambda: torus_model(2),
}


def homogeneous_model(name: str) -> ReductiveSplit:
    if name.startswith("sphere-") and name[7:].isdigit():
        return sphere_model(int(name[7:]))
    if name.startswith("torus-") and name[6:].isdigit():
        return torus_model(int(name[6:]))
    try:
        return HOMOGENEOUS_CATALOG[name]()
    except KeyError:
        raise HomogeneousError(f"unknown homogeneous model {name!r}") from None
