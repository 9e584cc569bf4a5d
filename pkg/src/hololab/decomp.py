"""Abstract curvature tensors: Bianchi maps, Ricci contraction and the
scalar / traceless-Ricci / Weyl decomposition.

Tensors are 4-index arrays ``R[i, j, k, l]`` in an orthonormal frame, read as
the operator on 2-forms ``e_i ^ e_j -> sum_{k<l} R[i, j, k, l] e_k ^ e_l``
(2-forms identified with skew matrices, ``x ^ y -> x y^T - y x^T``).  With this
reading the unit round sphere has ``R = identity`` on 2-forms.

Inner product on ``S^2(Lambda^2)`` is ``tr(a o b)``, which is ``1/4`` of the
full index contraction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .algebra import AlternatingForm, MatrixAlgebraSpan, multi_indices, null_space, orthonormal_rows


class CurvatureInputError(ValueError):
    pass


class NotACurvatureTensorError(CurvatureInputError):
    pass


def _pairs(n):
    return list(itertools.combinations(range(n), 2))


class AbstractCurvature:
    """An element of ``S^2(Lambda^2)`` stored as a full ``(n, n, n, n)`` array."""

    def __init__(self, components, check=True):
        r = np.array(components, dtype=float)
        if r.ndim != 4 or len(set(r.shape)) != 1:
            raise CurvatureInputError("curvature components must have shape (n, n, n, n)")
        if check:
            scale = max(1.0, float(np.abs(r).max()))
            sym = max(np.abs(r + r.transpose(1, 0, 2, 3)).max(), np.abs(r + r.transpose(0, 1, 3, 2)).max(),
                      np.abs(r - r.transpose(2, 3, 0, 1)).max())
            if sym > 1e-8 * scale:
                raise CurvatureInputError(f"tensor is not in S^2(Lambda^2) (symmetry defect {sym:.2e})")
        self.components = r

    @property
    def dim(self):
        return self.components.shape[0]

    # constructors ----------------------------------------------------
    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n,) * 4))

    @classmethod
    def identity(cls, n):
        """Identity on 2-forms: the curvature of the unit round sphere."""
        d = np.eye(n)
        return cls(np.einsum("ik,jl->ijkl", d, d) - np.einsum("il,jk->ijkl", d, d))

    @classmethod
    def from_operator(cls, m, n):
        """From the matrix of the operator in the orthonormal basis ``e_i ^ e_j`` (i < j)."""
        m = np.asarray(m, dtype=float)
        pairs = _pairs(n)
        r = np.zeros((n,) * 4)
        for p, (i, j) in enumerate(pairs):
            for q, (k, l) in enumerate(pairs):
                v = m[p, q]
                r[i, j, k, l], r[j, i, k, l], r[i, j, l, k], r[j, i, l, k] = v, -v, -v, v
        return cls(r)

    @classmethod
    def symmetric_product(cls, phi, psi=None):
        """``phi . psi`` (symmetrized) for 2-forms given as skew matrices or forms."""
        a = _as_skew(phi)
        b = a if psi is None else _as_skew(psi)
        return cls(0.5 * (np.einsum("ij,kl->ijkl", a, b) + np.einsum("ij,kl->ijkl", b, a)))

    # views ------------------------------------------------------------
    def operator(self):
        pairs = _pairs(self.dim)
        idx = np.array(pairs).T if pairs else np.zeros((2, 0), dtype=int)
        return self.components[idx[0][:, None], idx[1][:, None], idx[0][None, :], idx[1][None, :]]

    def apply(self, x):
        """Image of a skew matrix ``x`` (as a 2-form): ``R(x)[k, l] = 1/2 sum_ij x_ij R_ijkl``."""
        return 0.5 * np.einsum("ij,ijkl->kl", np.asarray(x, dtype=float), self.components)

    def rotate(self, q):
        """Components in the frame ``q`` (columns): ``R'_abcd = q_ia q_jb q_kc q_ld R_ijkl``."""
        return AbstractCurvature(np.einsum("ijkl,ia,jb,kc,ld->abcd", self.components, q, q, q, q), check=False)

    def norm(self):
        return float(np.sqrt(inner(self, self)))

    def __add__(self, other):
        return AbstractCurvature(self.components + _arr(other), check=False)

    def __sub__(self, other):
        return AbstractCurvature(self.components - _arr(other), check=False)

    def __mul__(self, c):
        return AbstractCurvature(self.components * float(c), check=False)

    __rmul__ = __mul__

    def __repr__(self):
        return f"AbstractCurvature(n={self.dim}, norm={self.norm():.6g})"


def _arr(x):
    return x.components if isinstance(x, AbstractCurvature) else np.asarray(x, dtype=float)


def _as_skew(phi):
    if isinstance(phi, AlternatingForm):
        return phi.as_matrix()
    return np.asarray(phi, dtype=float)


def inner(a, b) -> float:
    """``tr(a o b)`` on ``S^2(Lambda^2)``."""
    return 0.25 * float(np.sum(_arr(a) * _arr(b)))


# ---------------------------------------------------------------------------
# First Bianchi map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BianchiDefect:
    """``cyclic``: the cyclic sum ``<R_vw x + R_wx v + R_xv w, y>`` as a 4-form;
    ``projection``: its alternation, ``cyclic / 3``.  ``norm`` is the Euclidean
    norm of the full cyclic-sum array, ``relative`` that norm over ``|R|``."""

    cyclic: AlternatingForm | None
    projection: AlternatingForm | None
    norm: float
    relative: float


def _cyclic_sum(r):
    # <R_vw x, y> is the 2-form R(v ^ w) evaluated on (x, y), i.e. R[v, w, x, y]
    return r + r.transpose(1, 2, 0, 3) + r.transpose(2, 0, 1, 3)


def first_bianchi_defect(r) -> BianchiDefect:
    """First-Bianchi image of ``R``; for ``n < 4`` the forms are ``None`` (Lambda^4 = 0)."""
    rr = _arr(r)
    n = rr.shape[0]
    cyc = _cyclic_sum(rr)
    full = float(np.sqrt(np.sum(cyc * cyc)))
    scale = float(np.sqrt(np.sum(rr * rr)))
    form = None
    if n >= 4:
        idx = np.array(multi_indices(n, 4)).T
        form = AlternatingForm(n, 4, cyc[idx[0], idx[1], idx[2], idx[3]])
    return BianchiDefect(form, None if form is None else form / 3.0, full, full / scale if scale > 0 else 0.0)


@lru_cache(maxsize=None)
def _sym_basis(n):
    """Orthonormal basis of ``S^2(Lambda^2)`` as (N(N+1)/2, n, n, n, n) arrays."""
    pairs = _pairs(n)
    big = len(pairs)
    out = []
    for p in range(big):
        for q in range(p, big):
            m = np.zeros((big, big))
            if p == q:
                m[p, p] = 1.0
            else:
                m[p, q] = m[q, p] = 1.0 / np.sqrt(2.0)
            out.append(AbstractCurvature.from_operator(m, n).components)
    return np.array(out).reshape(len(out), *(n,) * 4) if out else np.zeros((0,) + (n,) * 4)


def bianchi_matrix(n):
    """Matrix of the cyclic-sum map from an orthonormal basis of ``S^2(Lambda^2)`` to ``Lambda^4``."""
    basis = _sym_basis(n)
    idx = multi_indices(n, 4)
    if not idx:
        return np.zeros((0, len(basis)))
    cols = []
    for b in basis:
        cyc = _cyclic_sum(b)
        cols.append([cyc[i, j, k, l] for i, j, k, l in idx])
    return np.array(cols).T


def dim_abstract_space(n: int, check: bool = True) -> int:
    """``n^2 (n^2 - 1) / 12``, cross-checked against ``dim S^2(Lambda^2) - rank(beta)``."""
    if n < 2:
        raise CurvatureInputError("dimension must be >= 2")
    formula = n * n * (n * n - 1) // 12
    if check:
        ranked = dim_by_rank(n)
        if ranked != formula:
            raise AssertionError(f"rank computation gives {ranked}, formula gives {formula}")
    return formula


def dim_by_rank(n: int) -> int:
    big = n * (n - 1) // 2
    total = big * (big + 1) // 2
    mat = bianchi_matrix(n)
    rank = int(np.linalg.matrix_rank(mat)) if mat.size else 0
    return total - rank


@lru_cache(maxsize=None)
def _curvature_basis(n):
    basis = _sym_basis(n)
    mat = bianchi_matrix(n)
    if mat.size == 0:
        return basis
    ker = null_space(mat)  # rows: orthonormal coefficient vectors
    return np.einsum("kb,b...->k...", ker, basis)


def curvature_basis(n):
    """Basis of the abstract curvature space, orthonormal for ``inner``."""
    return _curvature_basis(n).copy()


def random_curvature(n, rng=None) -> AbstractCurvature:
    """A random element of the abstract curvature space (Gaussian coefficients)."""
    rng = np.random.default_rng(rng)
    basis = _curvature_basis(n)
    return AbstractCurvature(np.einsum("k,k...->...", rng.standard_normal(len(basis)), basis), check=False)


# ---------------------------------------------------------------------------
# Ricci contraction and its adjoint
# ---------------------------------------------------------------------------

def ricci_contract(r) -> np.ndarray:
    """``c(R)_vw = sum_i R[i, v, i, w]``; ``(n - 1) I`` for the unit sphere."""
    rr = _arr(r)
    out = np.einsum("ivib->vb", rr)
    return 0.5 * (out + out.T)


def c_star(s) -> AbstractCurvature:
    """Adjoint of the contraction: ``{S, .}``, i.e. ``phi -> S phi + phi S``."""
    s = np.asarray(s, dtype=float)
    d = np.eye(s.shape[0])
    r = (np.einsum("ki,jl->ijkl", s, d) - np.einsum("kj,il->ijkl", s, d)
         + np.einsum("ik,jl->ijkl", d, s) - np.einsum("jk,il->ijkl", d, s))
    return AbstractCurvature(r, check=False)


def cc_star(s) -> np.ndarray:
    """``c(c*(S)) = (n - 2) S + tr(S) I``."""
    return ricci_contract(c_star(s))


def cc_star_inverse(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    if n <= 2:
        raise CurvatureInputError("cc* is invertible only for n >= 3")
    return s / (n - 2) - np.trace(s) / (2 * (n - 1) * (n - 2)) * np.eye(n)


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvatureDecomposition:
    s: float
    r0: np.ndarray
    W: AbstractCurvature
    scalar_part: AbstractCurvature
    ricci_part: AbstractCurvature
    original: AbstractCurvature

    @property
    def dim(self):
        return self.original.dim

    @property
    def ricci(self):
        return self.r0 + self.s / self.dim * np.eye(self.dim)

    def reconstruct(self):
        return self.scalar_part + self.ricci_part + self.W

    def reconstruction_error(self):
        return float(np.abs(self.reconstruct().components - self.original.components).max())

    def orthogonality(self):
        parts = {"S": self.scalar_part, "Z": self.ricci_part, "W": self.W}
        return {f"{a}.{b}": abs(inner(parts[a], parts[b])) for a, b in (("S", "Z"), ("S", "W"), ("Z", "W"))}

    def weyl_contraction(self):
        return float(np.abs(ricci_contract(self.W)).max())


def decompose(r, bianchi_tol=1e-6) -> CurvatureDecomposition:
    """``R = s/(n(n-1)) I + 1/(n-2) {r0, .} + W``; for ``n = 2`` only the scalar part is nonzero."""
    rc = r if isinstance(r, AbstractCurvature) else AbstractCurvature(r)
    n = rc.dim
    if n < 2:
        raise CurvatureInputError("decomposition needs n >= 2")
    defect = first_bianchi_defect(rc)
    if defect.relative > bianchi_tol:
        raise NotACurvatureTensorError(f"first Bianchi defect {defect.relative:.3e} exceeds {bianchi_tol:g}")
    ric = ricci_contract(rc)
    s = float(np.trace(ric))
    r0 = ric - s / n * np.eye(n)
    scalar_part = AbstractCurvature.identity(n) * (s / (n * (n - 1)))
    if n == 2:
        zero = AbstractCurvature.zero(2)
        return CurvatureDecomposition(s, np.zeros((2, 2)), zero, scalar_part, zero, rc)
    ricci_part = c_star(r0) * (1.0 / (n - 2))
    w = rc - scalar_part - ricci_part
    return CurvatureDecomposition(s, r0, w, scalar_part, ricci_part, rc)


# ---------------------------------------------------------------------------
# Holonomy-reduced curvature and second Bianchi
# ---------------------------------------------------------------------------

def reduced_membership(r, hol) -> float:
    """Distance (``tr(a o b)`` norm) of ``R`` from ``S^2(h)``.

    ``hol`` is a span of skew matrices in the same orthonormal frame as ``R``.
    """
    rr = _arr(r)
    span = hol.span if hasattr(hol, "span") else hol
    basis = span.basis if isinstance(span, MatrixAlgebraSpan) else np.asarray(span, dtype=float)
    if len(basis) == 0:
        return float(np.sqrt(inner(rr, rr)))
    prods = []
    for a, b in itertools.combinations_with_replacement(range(len(basis)), 2):
        xa, xb = basis[a], basis[b]
        prods.append(0.5 * (np.einsum("ij,kl->ijkl", xa, xb) + np.einsum("ij,kl->ijkl", xb, xa)).ravel())
    q = orthonormal_rows(np.array(prods))
    flat = rr.ravel()
    resid = flat - q.T @ (q @ flat)
    return float(0.5 * np.linalg.norm(resid))


@dataclass(frozen=True)
class SecondBianchi:
    cyclic: np.ndarray
    norm: float
    relative: float


def second_bianchi_defect(dr) -> SecondBianchi:
    """Cyclic sum ``(nabla_m R)_ij.. + (nabla_i R)_jm.. + (nabla_j R)_mi..`` of ``DR[m, i, j, k, l]``."""
    dr = np.asarray(dr, dtype=float)
    cyc = dr + dr.transpose(1, 2, 0, 3, 4) + dr.transpose(2, 0, 1, 3, 4)
    norm = float(np.abs(cyc).max())
    scale = float(np.abs(dr).max())
    return SecondBianchi(cyc, norm, norm / max(scale, 1.0))
