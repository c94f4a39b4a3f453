"""Dense matrix primitives used by the ELM solvers.

Matrices are plain 2-D ``float64`` numpy arrays. The helpers here add the
shape and finiteness checks the solvers rely on, an SVD pseudoinverse that
serves as the reference oracle, Cholesky-based SPD solves that never form an
explicit inverse, and two routes to a rank-revealing column ordering:
Householder QR with column pivoting on the matrix itself, and pivoted
Cholesky on its Gram matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import blas, lapack, solve_triangular

EPS = float(np.finfo(np.float64).eps)


class SingularMatrix(np.linalg.LinAlgError):
    """A Cholesky pivot was non-positive (or numerically zero)."""

    def __init__(self, index: int, value: float):
        self.index = int(index)
        self.value = float(value)
        super().__init__(f"non-positive pivot {self.value:.3e} at index {self.index}")


class SvdConvergenceError(np.linalg.LinAlgError):
    pass


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a nonempty, finite, 2-D float64 array."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must be nonempty, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return m


def _shape(a: np.ndarray) -> str:
    return f"{a.shape[0]}x{a.shape[1]}"


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"cannot multiply {_shape(a)} by {_shape(b)}: inner dimensions differ"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    if not np.isfinite(out).all():
        raise FloatingPointError(f"product of {_shape(a)} and {_shape(b)} overflowed")
    return out


def transpose(a) -> np.ndarray:
    return np.ascontiguousarray(as_matrix(a).T)


def singular_values(a) -> np.ndarray:
    try:
        return np.linalg.svd(as_matrix(a), compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"SVD did not converge: {exc}") from exc


def svd_rank(a, tol: float | None = None) -> int:
    """Number of singular values above ``tol * sigma_max``."""
    a = as_matrix(a)
    if tol is None:
        tol = max(a.shape) * EPS
    s = singular_values(a)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def pinv_svd(a, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via a thin SVD.

    Singular values at or below ``tol * sigma_max`` are treated as zero;
    ``tol`` defaults to ``max(rows, cols) * eps``.
    """
    a = as_matrix(a)
    if tol is None:
        tol = max(a.shape) * EPS
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"SVD did not converge: {exc}") from exc
    keep = s > tol * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


def gram(a: np.ndarray, upper_only: bool = False) -> np.ndarray:
    """``a.T @ a`` via a symmetric rank-k update.

    With ``upper_only`` the strict lower triangle is left as zeros, which is
    all the upper-triangle factorizations here read.
    """
    if not a.flags.c_contiguous:
        return a.T @ a
    g = blas.dsyrk(1.0, a.T, trans=0, lower=0)
    if not upper_only:
        lower = np.tril_indices(g.shape[0], -1)
        g[lower] = g.T[lower]
    return g


def cholesky_upper(m: np.ndarray) -> np.ndarray:
    """Upper Cholesky factor R with ``R.T @ R == m``.

    Pivots at or below ``dim * eps * max(diag(m))`` count as non-positive:
    at that size they are rounding noise and the factor would be garbage.
    """
    dim = m.shape[0]
    scale = float(np.max(np.diag(m))) if dim else 0.0
    if not scale > 0.0:
        return _raise_first_nonpositive(m)
    r, info = lapack.dpotrf(m, lower=0, clean=1)
    if info > 0:
        k = info - 1
        value = m[k, k] - float(r[:k, k] @ r[:k, k])
        raise SingularMatrix(k, value)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    pivots = np.diag(r) ** 2
    threshold = dim * EPS * scale
    small = np.flatnonzero(pivots <= threshold)
    if small.size:
        k = int(small[0])
        raise SingularMatrix(k, float(pivots[k]))
    return r


def _raise_first_nonpositive(m: np.ndarray):
    diag = np.diag(m)
    k = int(np.argmax(diag <= 0.0))
    raise SingularMatrix(k, float(diag[k]))


def cho_solve_upper(r: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(R.T R) X = rhs`` given the upper factor R."""
    z = solve_triangular(r, rhs, trans="T", check_finite=False)
    return solve_triangular(r, z, check_finite=False)


def solve_spd(m, rhs) -> np.ndarray:
    """Solve ``m @ X == rhs`` for symmetric positive definite ``m``.

    Raises :class:`SingularMatrix` with the offending pivot when the
    factorization breaks down.
    """
    m = as_matrix(m, "system matrix")
    rhs = as_matrix(rhs, "right-hand side")
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"system matrix must be square, got {_shape(m)}")
    if rhs.shape[0] != m.shape[0]:
        raise ValueError(
            f"right-hand side has {rhs.shape[0]} rows, system is {_shape(m)}"
        )
    asym = np.max(np.abs(m - m.T))
    if asym > 1e-12 * max(np.max(np.abs(m)), np.finfo(np.float64).tiny):
        raise ValueError(f"system matrix is not symmetric (max asymmetry {asym:.3e})")
    return cho_solve_upper(cholesky_upper(m), rhs)


@dataclass(frozen=True, eq=False)
class ColumnPermutation:
    """A column ordering with the numerical rank detected along the way.

    ``order[i]`` is the original index of the column placed at position i.
    The first ``rank`` positions hold linearly independent columns.
    """

    order: np.ndarray
    rank: int
    tolerance: float = field(default=0.0)

    def __post_init__(self):
        order = np.array(self.order, dtype=np.intp)
        if order.ndim != 1:
            raise ValueError("order must be one-dimensional")
        if not np.array_equal(np.sort(order), np.arange(order.size)):
            raise ValueError("order is not a permutation of 0..n-1")
        if not 0 <= self.rank <= order.size:
            raise ValueError(f"rank {self.rank} outside [0, {order.size}]")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")
        order.flags.writeable = False
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "rank", int(self.rank))

    @classmethod
    def identity(cls, n: int, rank: int = 0, tolerance: float = 0.0) -> ColumnPermutation:
        return cls(np.arange(n), rank, tolerance)

    def __len__(self) -> int:
        return int(self.order.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ColumnPermutation):
            return NotImplemented
        return (
            self.rank == other.rank
            and self.tolerance == other.tolerance
            and np.array_equal(self.order, other.order)
        )

    def __hash__(self):
        return hash((self.order.tobytes(), self.rank, self.tolerance))


def apply_permutation(a, p: ColumnPermutation) -> np.ndarray:
    """Reorder columns: column i of the result is column ``p.order[i]`` of ``a``."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[1] != len(p):
        raise ValueError(f"matrix with shape {a.shape} does not match permutation of length {len(p)}")
    return a[:, p.order]


def invert_permutation_rows(b, p: ColumnPermutation) -> np.ndarray:
    """Undo a column permutation on the row side (e.g. output weights)."""
    b = np.asarray(b)
    if b.ndim != 2 or b.shape[0] != len(p):
        raise ValueError(f"matrix with shape {b.shape} does not match permutation of length {len(p)}")
    out = np.empty_like(b)
    out[p.order] = b
    return out


def rank_revealing_permutation(a, tol: float = 0.0) -> ColumnPermutation:
    """Householder QR with column pivoting (Businger-Golub).

    At each step the remaining column of largest norm is moved to the front;
    among norms equal to within rounding (relative ``16 * rows * eps``) the
    lowest original index wins. The rank is the number of diagonal factors
    with ``|R_kk| > tol * |R_00|``. ``tol == 0`` selects
    ``max(rows, cols) * eps``.
    """
    a = as_matrix(a)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    rows, cols = a.shape
    rel = tol if tol > 0 else max(rows, cols) * EPS
    tie_rel = 16.0 * rows * EPS
    r = a.copy()
    order = np.arange(cols)
    rank = 0
    r00 = 0.0
    for k in range(min(rows, cols)):
        tail = r[k:, k:]
        norms = np.einsum("ij,ij->j", tail, tail)
        best = norms.max()
        # norms equal up to accumulated rounding count as ties
        ties = np.flatnonzero(norms >= best * (1.0 - tie_rel))
        j = k + int(ties[np.argmin(order[k + ties])])
        if j != k:
            r[:, [k, j]] = r[:, [j, k]]
            order[[k, j]] = order[[j, k]]
        alpha = float(np.sqrt(best))
        if k == 0:
            r00 = alpha
        if alpha == 0.0 or alpha <= rel * r00:
            break
        rank += 1
        x = r[k:, k]
        v = x.copy()
        v[0] += np.copysign(alpha, x[0])
        vv = float(v @ v)
        if vv > 0.0:
            tail = r[k:, k:]
            tail -= np.outer(v, (2.0 / vv) * (v @ tail))
    if rank == 0:
        return ColumnPermutation.identity(cols, 0, rel)
    return ColumnPermutation(order, rank, rel)


def pivoted_cholesky(g, tol: float = 0.0) -> tuple[np.ndarray, ColumnPermutation]:
    """Rank-revealing pivoted Cholesky of a symmetric PSD (Gram) matrix.

    For ``g = H.T @ H`` this selects the same pivots as column-pivoted QR of
    H, with ``R_kk**2`` as the pivots, at a fraction of the cost. ``tol`` is
    relative to ``|R_00|`` as in :func:`rank_revealing_permutation`; pivots
    stop at ``tol**2 * g_max``. ``tol == 0`` selects LAPACK's default
    ``dim * eps * g_max`` on the pivots. Only the upper triangle of ``g`` is
    read.

    Returns the ``rank x dim`` upper factor R with
    ``R.T @ R == g[order][:, order]`` on the leading block, and the
    permutation. With full rank R is the complete Cholesky factor.
    """
    g = as_matrix(g, "Gram matrix")
    if g.shape[0] != g.shape[1]:
        raise ValueError(f"Gram matrix must be square, got {_shape(g)}")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    c, perm = _pstrf(g, tol)
    return np.triu(c[: perm.rank]), perm


def _pstrf(g: np.ndarray, tol: float) -> tuple[np.ndarray, ColumnPermutation]:
    # c holds R in its upper triangle on rows < rank; everything else is junk
    dim = g.shape[0]
    gmax = float(np.max(np.diag(g)))
    pivot_rel = tol * tol if tol > 0 else dim * EPS
    if not gmax > 0.0:
        return np.zeros((0, dim)), ColumnPermutation.identity(dim, 0, np.sqrt(pivot_rel))
    c, piv, rank, info = lapack.dpstrf(g, tol=pivot_rel * gmax, lower=0)
    if info < 0:
        raise ValueError(f"dpstrf: illegal argument {-info}")
    if rank == 0:
        return np.zeros((0, dim)), ColumnPermutation.identity(dim, 0, np.sqrt(pivot_rel))
    return c, ColumnPermutation(piv - 1, rank, float(np.sqrt(pivot_rel)))
