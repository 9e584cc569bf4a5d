"""Linear algebra kernel: matrix Lie-algebra spans, commutants and alternating forms.

Conventions shared by every other module:

* A 2-form with components ``phi[i, j]`` is identified with the skew matrix
  having the same entries, so ``x ^ y`` is the matrix ``x y^T - y x^T`` and
  ``(x ^ y) v = <y, v> x - <x, v> y``.
* Forms are stored by their components on increasing multi-indices, with the
  determinant normalisation ``(dx1 ^ dx2)(e1, e2) = 1``.
* A matrix ``X`` acts on forms by the derivative of pull-back by ``exp(-tX)``:
  ``(X.T)(v1, ..., vk) = -sum_s T(v1, ..., X vs, ..., vk)``.  On 2-forms and
  skew ``X`` this is the commutator ``[X, T]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

DEFAULT_RANK_TOL = 1e-8


class AlgebraInputError(ValueError):
    """Raised for malformed matrices, sizes or degrees."""


# ---------------------------------------------------------------------------
# Subspace helpers
# ---------------------------------------------------------------------------

def orthonormal_rows(vectors, tol=DEFAULT_RANK_TOL, atol=0.0):
    """Orthonormal basis (as rows) of the row span of ``vectors``.

    Singular values below ``tol * s_max`` (and below ``atol``) are treated as zero.
    """
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2:
        raise AlgebraInputError("expected a 2-d array of row vectors")
    if vectors.shape[0] == 0:
        return np.zeros((0, vectors.shape[1]))
    _, s, vt = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0 or s[0] <= atol or s[0] == 0.0:
        return np.zeros((0, vectors.shape[1]))
    keep = (s > tol * s[0]) & (s > atol)
    return vt[keep]


def null_space(matrix, tol=DEFAULT_RANK_TOL, atol=1e-12):
    """Orthonormal basis (rows) of the kernel of ``matrix``.

    Singular values below ``tol * s_max`` or below ``atol`` count as zero; the
    absolute floor keeps a numerically zero matrix from having full rank.
    """
    matrix = np.asarray(matrix, dtype=float)
    ncols = matrix.shape[1]
    if matrix.shape[0] == 0:
        return np.eye(ncols)
    _, s, vt = np.linalg.svd(matrix, full_matrices=True)
    if s.size == 0 or s[0] <= atol:
        return np.eye(ncols)
    rank = int(np.sum(s > max(tol * s[0], atol)))
    return vt[rank:]


def principal_angles(a, b):
    """Principal angles (radians, ascending) between the row spans of ``a`` and ``b``.

    ``a`` and ``b`` must already have orthonormal rows.  The number of angles is
    ``min(len(a), len(b))``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros(0)
    s = np.linalg.svd(a @ b.T, compute_uv=False)
    s = np.clip(s, -1.0, 1.0)
    # arccos is ill-conditioned near 1; recover small angles from the residual.
    angles = np.arccos(s)
    small = s > 0.999
    if np.any(small):
        k = min(a.shape[0], b.shape[0])
        src, dst = (a, b) if a.shape[0] <= b.shape[0] else (b, a)
        resid = src - (src @ dst.T) @ dst
        rs = np.linalg.svd(resid, compute_uv=False)
        rs = np.sort(np.concatenate([rs, np.zeros(max(0, k - rs.size))]))[:k]
        angles = np.where(small, np.arcsin(np.clip(rs, 0.0, 1.0)), angles)
    return np.sort(angles)


# ---------------------------------------------------------------------------
# Matrix Lie-algebra spans
# ---------------------------------------------------------------------------

def bracket(a, b):
    return a @ b - b @ a


@dataclass(frozen=True)
class MatrixAlgebraSpan:
    """A linear span of ``n x n`` real matrices with a Frobenius-orthonormal basis."""

    ambient_dim: int
    basis: np.ndarray
    rank_tol: float = DEFAULT_RANK_TOL
    closed: bool = False

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float).reshape(-1, self.ambient_dim, self.ambient_dim)
        if not np.all(np.isfinite(basis)):
            raise AlgebraInputError("span basis contains non-finite entries")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.basis.reshape(self.dim, self.ambient_dim * self.ambient_dim)

    def __len__(self):
        return self.dim

    def __iter__(self):
        return iter(self.basis)

    def residual(self, x) -> float:
        """Norm of the component of ``x`` orthogonal to the span, relative to ``|x|``."""
        v = np.asarray(x, dtype=float).ravel()
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        if self.dim:
            v = v - self.flat.T @ (self.flat @ v)
        return float(np.linalg.norm(v) / nv)

    def contains(self, x, tol=None) -> bool:
        return self.residual(x) < (self.rank_tol if tol is None else tol)

    def conjugate(self, q):
        """Span of ``q^-1 X q`` for ``X`` in the span."""
        q = np.asarray(q, dtype=float)
        qinv = np.linalg.inv(q)
        return span_of([qinv @ x @ q for x in self.basis], self.ambient_dim, self.rank_tol,
                       closed=self.closed)

    def bracket_defect(self) -> float:
        """Largest norm of the part of ``[a, b]`` outside the span, over orthonormal basis pairs.

        The basis is orthonormal, so this is relative to ``|a| |b| = 1``; a
        relative residual of ``[a, b]`` itself would blow up for commuting pairs.
        """
        worst = 0.0
        for a, b in itertools.combinations(self.basis, 2):
            v = bracket(a, b).ravel()
            v = v - self.flat.T @ (self.flat @ v)
            worst = max(worst, float(np.linalg.norm(v)))
        return worst


def _check_square(mats):
    mats = [np.asarray(m, dtype=float) for m in mats]
    if not mats:
        return mats, None
    n = mats[0].shape[0]
    for m in mats:
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise AlgebraInputError(f"generator of shape {m.shape} is not square")
        if m.shape[0] != n:
            raise AlgebraInputError("generators have mismatched sizes")
        if not np.all(np.isfinite(m)):
            raise AlgebraInputError("generator contains non-finite entries")
    return mats, n


def span_of(mats, n=None, tol=DEFAULT_RANK_TOL, atol=0.0, closed=False):
    """Linear span (no bracket closure) of a list of matrices."""
    mats, m = _check_square(mats)
    n = m if n is None else n
    if n is None:
        raise AlgebraInputError("ambient dimension unknown for empty generator list")
    if not mats:
        return MatrixAlgebraSpan(n, np.zeros((0, n, n)), tol, closed)
    rows = orthonormal_rows(np.array([x.ravel() for x in mats]), tol, atol)
    return MatrixAlgebraSpan(n, rows.reshape(-1, n, n), tol, closed)


def span_closure(generators, tol=DEFAULT_RANK_TOL, atol=0.0, n=None):
    """Smallest bracket-closed subspace containing ``generators``.

    The rank of every intermediate span is decided by a relative singular-value
    cutoff ``tol``; ``atol`` discards generators that are numerically zero.
    """
    mats, m = _check_square(generators)
    n = m if n is None else n
    if n is None:
        raise AlgebraInputError("span_closure needs at least one generator or n")
    current = span_of(mats, n, tol, atol)
    for _ in range(n * n):
        if current.dim == 0:
            break
        brackets = [bracket(a, b) for a, b in itertools.combinations(current.basis, 2)]
        if not brackets:
            break
        stacked = np.vstack([current.flat, np.array([b.ravel() for b in brackets])])
        # Brackets of orthonormal elements are O(1): compare against the unit scale.
        _, s, vt = np.linalg.svd(stacked, full_matrices=False)
        rank = int(np.sum(s > tol * max(s[0], 1.0)))
        if rank <= current.dim:
            break
        current = MatrixAlgebraSpan(n, vt[:rank].reshape(-1, n, n), tol)
    return MatrixAlgebraSpan(n, current.basis, tol, closed=True)


def commutator_map(span: MatrixAlgebraSpan) -> np.ndarray:
    """Stacked matrix of ``C -> [X, C]`` over the basis, acting on ``vec(C)`` (row-major)."""
    n = span.ambient_dim
    eye = np.eye(n)
    blocks = [np.kron(x, eye) - np.kron(eye, x.T) for x in span.basis]
    if not blocks:
        return np.zeros((0, n * n))
    return np.vstack(blocks)


def commutant(span: MatrixAlgebraSpan, tol=None) -> MatrixAlgebraSpan:
    """Basis of all matrices commuting with every element of ``span``."""
    n = span.ambient_dim
    if n < 1:
        raise AlgebraInputError("empty ambient space")
    tol = span.rank_tol if tol is None else tol
    kernel = null_space(commutator_map(span), tol)
    return MatrixAlgebraSpan(n, kernel.reshape(-1, n, n), tol)


def center(span: MatrixAlgebraSpan, tol=None) -> MatrixAlgebraSpan:
    """Elements of the span commuting with the whole span."""
    tol = span.rank_tol if tol is None else tol
    n = span.ambient_dim
    d = span.dim
    if d == 0:
        return span
    # Coefficients c with [sum c_a X_a, X_b] = 0 for all b.
    cols = []
    for a in span.basis:
        cols.append(np.concatenate([bracket(a, b).ravel() for b in span.basis]))
    m = np.array(cols).T
    coeffs = null_space(m, tol)
    elems = np.einsum("ka,aij->kij", coeffs, span.basis) if coeffs.size else np.zeros((0, n, n))
    return span_of(list(elems), n, tol)


def so_basis(n):
    """Elementary skew matrices ``E_ij - E_ji`` for ``i < j``."""
    out = []
    for i, j in itertools.combinations(range(n), 2):
        e = np.zeros((n, n))
        e[i, j], e[j, i] = 1.0, -1.0
        out.append(e)
    return out


def gl_basis(n):
    out = []
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n))
            e[i, j] = 1.0
            out.append(e)
    return out


# ---------------------------------------------------------------------------
# Alternating forms
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def multi_indices(n, k):
    return tuple(itertools.combinations(range(n), k))


@lru_cache(maxsize=None)
def _index_lookup(n, k):
    return {idx: pos for pos, idx in enumerate(multi_indices(n, k))}


def _sort_sign(idx):
    """Sign of the permutation sorting ``idx`` and the sorted tuple (sign 0 on repeats)."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, None
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


@lru_cache(maxsize=None)
def _action_table(n, k):
    """Sparse description of the induced action of ``gl(n)`` on increasing k-forms."""
    lookup = _index_lookup(n, k)
    rows, cols, ms, js, signs = [], [], [], [], []
    for r, idx in enumerate(multi_indices(n, k)):
        for s, i_s in enumerate(idx):
            for m in range(n):
                new = idx[:s] + (m,) + idx[s + 1:]
                sign, srt = _sort_sign(new)
                if sign == 0:
                    continue
                rows.append(r)
                cols.append(lookup[srt])
                ms.append(m)
                js.append(i_s)
                signs.append(sign)
    return tuple(np.array(a, dtype=int if a is not signs else float)
                 for a in (rows, cols, ms, js, signs))


def induced_action(x, k):
    """Matrix of ``T -> X.T`` on k-form coefficient vectors (increasing basis)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    size = comb(n, k)
    rho = np.zeros((size, size))
    if k == 0:
        return rho
    rows, cols, ms, js, signs = _action_table(n, k)
    np.add.at(rho, (rows, cols), -signs * x[ms, js])
    return rho


@lru_cache(maxsize=None)
def _wedge_table(n, k, l):
    lookup_k = _index_lookup(n, k)
    lookup_l = _index_lookup(n, l)
    out_rows, a_idx, b_idx, signs = [], [], [], []
    for r, big in enumerate(multi_indices(n, k + l)):
        for pos in itertools.combinations(range(k + l), k):
            first = tuple(big[p] for p in pos)
            rest = tuple(big[p] for p in range(k + l) if p not in pos)
            sign, _ = _sort_sign(first + rest)
            out_rows.append(r)
            a_idx.append(lookup_k[first])
            b_idx.append(lookup_l[rest])
            signs.append(sign)
    return (np.array(out_rows, dtype=int), np.array(a_idx, dtype=int),
            np.array(b_idx, dtype=int), np.array(signs, dtype=float))


@lru_cache(maxsize=None)
def _complement_table(n, k):
    """For each increasing I, the position of its complement and sgn(I, I^c)."""
    lookup = _index_lookup(n, n - k)
    pos, signs = [], []
    for idx in multi_indices(n, k):
        comp = tuple(i for i in range(n) if i not in idx)
        sign, _ = _sort_sign(idx + comp)
        pos.append(lookup[comp])
        signs.append(sign)
    return np.array(pos, dtype=int), np.array(signs, dtype=float)


def compound_matrix(a, k):
    """k-th compound (matrix of k x k minors on increasing index sets) of ``a``."""
    a = np.asarray(a)
    n = a.shape[0]
    idx = multi_indices(n, k)
    if k == 0:
        return np.ones((1, 1), dtype=a.dtype)
    ii = np.array(idx)
    sub = a[ii[:, None, :, None], ii[None, :, None, :]]
    return np.linalg.det(sub)


class AlternatingForm:
    """An alternating k-form on R^n, stored on increasing multi-indices."""

    __slots__ = ("dim", "degree", "coeffs")

    def __init__(self, dim, degree, coeffs=None):
        if degree < 0 or degree > dim:
            raise AlgebraInputError(f"degree {degree} not in [0, {dim}]")
        size = comb(dim, degree)
        if coeffs is None:
            coeffs = np.zeros(size)
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (size,):
            raise AlgebraInputError(f"expected {size} coefficients, got shape {coeffs.shape}")
        self.dim = dim
        self.degree = degree
        self.coeffs = coeffs

    # construction -----------------------------------------------------
    @classmethod
    def from_monomials(cls, dim, terms, one_based=True):
        """Build from ``{(i, j, k): coefficient}``; unsorted tuples pick up signs."""
        terms = dict(terms)
        if not terms:
            raise AlgebraInputError("from_monomials needs at least one term (degree unknown)")
        degree = len(next(iter(terms)))
        form = cls(dim, degree)
        lookup = _index_lookup(dim, degree)
        for idx, value in terms.items():
            idx = tuple(i - 1 for i in idx) if one_based else tuple(idx)
            if len(idx) != degree or any(i < 0 or i >= dim for i in idx):
                raise AlgebraInputError(f"bad index tuple {idx}")
            sign, srt = _sort_sign(idx)
            if sign == 0:
                continue
            form.coeffs[lookup[srt]] += sign * value
        return form

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr)
        dim = arr.shape[0] if arr.ndim else 0
        degree = arr.ndim
        idx = multi_indices(dim, degree)
        coeffs = np.array([arr[i] for i in idx]) if degree else np.array([arr[()]])
        return cls(dim, degree, coeffs)

    @classmethod
    def volume(cls, dim):
        return cls(dim, dim, np.ones(1))

    # access -----------------------------------------------------------
    def component(self, *idx, one_based=False):
        if one_based:
            idx = tuple(i - 1 for i in idx)
        sign, srt = _sort_sign(idx)
        if sign == 0:
            return 0.0
        return sign * self.coeffs[_index_lookup(self.dim, self.degree)[srt]]

    @property
    def components(self):
        """Full antisymmetric ``n x ... x n`` array."""
        n, k = self.dim, self.degree
        arr = np.zeros((n,) * k, dtype=self.coeffs.dtype)
        if k == 0:
            arr[()] = self.coeffs[0]
            return arr
        perms = list(itertools.permutations(range(k)))
        psign = [_sort_sign(p)[0] for p in perms]
        for c, idx in zip(self.coeffs, multi_indices(n, k)):
            if c == 0:
                continue
            for p, s in zip(perms, psign):
                arr[tuple(idx[q] for q in p)] = s * c
        return arr

    def as_matrix(self):
        if self.degree != 2:
            raise AlgebraInputError("only 2-forms have a matrix form")
        return self.components

    @classmethod
    def from_matrix(cls, m):
        return cls.from_array(0.5 * (np.asarray(m) - np.asarray(m).T))

    def nonzero_terms(self, tol=0.0, one_based=True):
        off = 1 if one_based else 0
        return {tuple(i + off for i in idx): c
                for idx, c in zip(multi_indices(self.dim, self.degree), self.coeffs)
                if abs(c) > tol}

    # arithmetic -------------------------------------------------------
    def _same(self, other):
        if (self.dim, self.degree) != (other.dim, other.degree):
            raise AlgebraInputError("forms of different dimension or degree")

    def __add__(self, other):
        self._same(other)
        return AlternatingForm(self.dim, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._same(other)
        return AlternatingForm(self.dim, self.degree, self.coeffs - other.coeffs)

    def __neg__(self):
        return AlternatingForm(self.dim, self.degree, -self.coeffs)

    def __mul__(self, scalar):
        return AlternatingForm(self.dim, self.degree, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return AlternatingForm(self.dim, self.degree, self.coeffs / scalar)

    def __repr__(self):
        terms = self.nonzero_terms(1e-14)
        return f"AlternatingForm(dim={self.dim}, degree={self.degree}, terms={terms})"

    def norm(self):
        return float(np.linalg.norm(self.coeffs))

    def allclose(self, other, atol=1e-12):
        self._same(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))

    def wedge(self, other):
        if self.dim != other.dim:
            raise AlgebraInputError("wedge of forms on different spaces")
        k, l, n = self.degree, other.degree, self.dim
        if k + l > n:
            raise AlgebraInputError(f"wedge degree {k + l} exceeds dimension {n}")
        rows, a, b, s = _wedge_table(n, k, l)
        dtype = np.result_type(self.coeffs, other.coeffs)
        out = np.zeros(comb(n, k + l), dtype=dtype)
        np.add.at(out, rows, s * self.coeffs[a] * other.coeffs[b])
        return AlternatingForm(n, k + l, out)

    __xor__ = wedge

    def act(self, x):
        """Induced Lie-algebra action ``X.T``."""
        return AlternatingForm(self.dim, self.degree, induced_action(x, self.degree) @ self.coeffs)

    def pullback(self, a):
        """``(A^* T)(v1..vk) = T(A v1, ..., A vk)``."""
        a = np.asarray(a)
        return AlternatingForm(self.dim, self.degree,
                               compound_matrix(a, self.degree).T @ self.coeffs)


def form_inner(alpha, beta, metric=None):
    """Induced inner product of two k-forms (``metric`` is the bilinear form on vectors)."""
    alpha._same(beta)
    if metric is None:
        return float(np.dot(alpha.coeffs, beta.coeffs))
    ginv = np.linalg.inv(np.asarray(metric))
    return alpha.coeffs @ compound_matrix(ginv, alpha.degree) @ beta.coeffs


def hodge_star(alpha, metric=None, orientation=1):
    """Hodge star with respect to ``metric`` (identity by default) and orientation sign.

    Characterised by ``a ^ *b = <a, b> vol`` where ``vol = sqrt(det g) dx1^...^dxn``.
    Complex ``metric`` entries are accepted so callers can differentiate by complex step.
    """
    n, k = alpha.dim, alpha.degree
    pos, signs = _complement_table(n, k)
    if metric is None:
        raised = alpha.coeffs
        vol = 1.0
    else:
        g = np.asarray(metric)
        if g.shape != (n, n):
            raise AlgebraInputError("metric has the wrong shape")
        det = np.linalg.det(g)
        if np.isrealobj(g) and det <= 0:
            raise AlgebraInputError("metric is degenerate or not positive-definite")
        ginv = np.linalg.inv(g)
        raised = compound_matrix(ginv, k) @ alpha.coeffs
        vol = np.sqrt(det)
    out = np.zeros(comb(n, n - k), dtype=np.result_type(raised, vol))
    out[pos] = orientation * vol * signs * raised
    return AlternatingForm(n, n - k, out)


def action_matrix_on_forms(span: MatrixAlgebraSpan, k):
    """Stacked induced-action matrices over the basis of ``span``."""
    if not span.dim:
        return np.zeros((0, comb(span.ambient_dim, k)))
    return np.vstack([induced_action(x, k) for x in span.basis])


def invariant_tensors(span: MatrixAlgebraSpan, k, tol=None):
    """Basis of k-forms annihilated by every element of ``span``."""
    n = span.ambient_dim
    if k < 0 or k > n:
        raise AlgebraInputError(f"degree {k} not in [0, {n}]")
    tol = span.rank_tol if tol is None else tol
    kernel = null_space(action_matrix_on_forms(span, k), tol)
    return [AlternatingForm(n, k, v) for v in kernel]


def stabilizer(form: AlternatingForm, ambient="gl", tol=DEFAULT_RANK_TOL):
    """Lie algebra of matrices ``X`` in ``gl(n)`` or ``so(n)`` with ``X.T = 0``."""
    if form.norm() == 0.0:
        raise AlgebraInputError("stabilizer of the zero form is everything")
    n = form.dim
    if ambient == "gl":
        basis = gl_basis(n)
    elif ambient == "so":
        basis = so_basis(n)
    else:
        raise AlgebraInputError(f"unknown ambient algebra {ambient!r}")
    cols = np.array([form.act(x).coeffs for x in basis]).T
    coeffs = null_space(cols, tol)
    elems = np.einsum("ka,aij->kij", coeffs, np.array(basis)) if coeffs.size else []
    return span_of(list(elems), n, tol, closed=True)
