"""Single-hidden-layer ELM with three output-weight solvers.

* ``Direct``: least squares on the whole hidden matrix (normal equations,
  SVD pseudoinverse when those are singular).
* ``DfSplit``: the hidden columns are cut at a user-chosen index and the two
  blocks are solved with the block-inverse identities.
* ``RankBased``: a rank-revealing column ordering picks the cut. Columns that
  are linearly independent go first; the cut is placed at the numerical rank.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit

from .linalg import (
    EPS,
    SingularMatrix,
    as_matrix,
    cho_solve_upper,
    cholesky_upper,
    invert_permutation_rows,
    _pstrf,
    gram,
    pinv_svd,
)

RIDGE_SCALE = 1e-8
REFINE_STEPS = 2
# Gram-based rank decisions cannot resolve pivots below the rounding level of
# forming H.T @ H; this factor times max(N, L) * eps is that floor.
GRAM_PIVOT_FLOOR = 10.0


class Activation(enum.Enum):
    SIGMOID = "sigmoid"


class SingularSplit(np.linalg.LinAlgError):
    """A Gram block stayed singular after the ridge retry."""

    def __init__(self, which: str):
        self.which = which
        super().__init__(f"block {which} is singular even after ridge retry")


@dataclass(frozen=True)
class ElmParams:
    n_inputs: int
    n_hidden: int
    n_outputs: int
    activation: Activation = Activation.SIGMOID
    seed: int = 0

    def __post_init__(self):
        for name in ("n_inputs", "n_hidden", "n_outputs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not isinstance(self.activation, Activation):
            object.__setattr__(self, "activation", Activation(self.activation))


@dataclass(frozen=True, eq=False)
class HiddenLayer:
    weights: np.ndarray  # n_inputs x n_hidden
    biases: np.ndarray  # 1 x n_hidden
    activation: Activation = Activation.SIGMOID

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, eq=False)
class ElmModel:
    params: ElmParams
    hidden: HiddenLayer
    beta: np.ndarray  # n_hidden x n_outputs, original node order


@dataclass(frozen=True)
class Direct:
    def __str__(self) -> str:
        return "direct"


@dataclass(frozen=True)
class DfSplit:
    split_index: int

    def __post_init__(self):
        if self.split_index < 1:
            raise ValueError(f"split index must be >= 1, got {self.split_index}")

    def __str__(self) -> str:
        return f"df:{self.split_index}"


@dataclass(frozen=True)
class RankBased:
    """Rank-based split.

    With ``balanced=True`` a full-rank hidden matrix is still cut at
    ``ceil(L/2)`` so that the two-block path runs; by default it is solved as
    a single block (no dependent columns to separate).
    """

    rank_tol: float = 0.0
    balanced: bool = False

    def __post_init__(self):
        if not self.rank_tol >= 0:
            raise ValueError(f"rank tolerance must be nonnegative, got {self.rank_tol}")

    def __str__(self) -> str:
        name = "rank-balanced" if self.balanced else "rank"
        return f"{name}:{self.rank_tol!r}" if self.rank_tol else name


SolverStrategy = Union[Direct, DfSplit, RankBased]


def parse_strategy(text: str) -> SolverStrategy:
    """Parse ``direct``, ``df:<split>``, ``rank[:tol]`` or ``rank-balanced[:tol]``."""
    name, _, arg = text.strip().partition(":")
    try:
        if name == "direct" and not arg:
            return Direct()
        if name == "df":
            return DfSplit(int(arg))
        if name in ("rank", "rank-balanced"):
            return RankBased(float(arg) if arg else 0.0, balanced=name == "rank-balanced")
    except ValueError as exc:
        raise ValueError(f"bad strategy {text!r}: {exc}") from exc
    raise ValueError(f"unknown strategy {text!r}")


@dataclass
class SolveDiagnostics:
    strategy: str
    split: tuple[int, int]
    rank: int | None = None
    ridge_applied: bool = False
    fallback_to_direct: bool = False
    used_svd: bool = False
    solve_seconds: float = 0.0
    hidden_seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "rank": self.rank,
            "split": list(self.split),
            "ridge_applied": self.ridge_applied,
            "fallback_to_direct": self.fallback_to_direct,
            "used_svd": self.used_svd,
            "solve_seconds": self.solve_seconds,
            "hidden_seconds": self.hidden_seconds,
        }


def init_hidden(params: ElmParams) -> HiddenLayer:
    rng = np.random.default_rng(params.seed)
    weights = rng.uniform(-1.0, 1.0, size=(params.n_inputs, params.n_hidden))
    biases = rng.uniform(-1.0, 1.0, size=(1, params.n_hidden))
    weights.flags.writeable = False
    biases.flags.writeable = False
    return HiddenLayer(weights, biases, params.activation)


def hidden_matrix(hidden: HiddenLayer, X) -> np.ndarray:
    """``H[i, j] = g(x_i . w_j + b_j)``, an N x L matrix."""
    X = as_matrix(X, "X")
    if X.shape[1] != hidden.n_inputs:
        raise ValueError(
            f"X has {X.shape[1]} features, hidden layer expects {hidden.n_inputs}"
        )
    return expit(X @ hidden.weights + hidden.biases)


def _check_system(H, Y) -> tuple[np.ndarray, np.ndarray]:
    H = as_matrix(H, "H")
    Y = as_matrix(Y, "Y")
    if H.shape[0] != Y.shape[0]:
        raise ValueError(f"H has {H.shape[0]} rows but Y has {Y.shape[0]}")
    return H, Y


def _direct(H: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, bool]:
    n, L = H.shape
    try:
        if n >= L:
            return cho_solve_upper(cholesky_upper(gram(H)), H.T @ Y), False
        return H.T @ cho_solve_upper(cholesky_upper(H @ H.T), Y), False
    except SingularMatrix:
        return pinv_svd(H) @ Y, True


def solve_direct(H, Y) -> np.ndarray:
    """Least-squares output weights ``H^+ Y`` for the whole hidden matrix."""
    H, Y = _check_system(H, Y)
    return _direct(H, Y)[0]


def _factor_with_ridge(m: np.ndarray, ridge: float, which: str) -> tuple[np.ndarray, bool]:
    try:
        return cholesky_upper(m), False
    except SingularMatrix:
        shift = ridge * float(np.trace(m)) / m.shape[0]
        if not shift > 0.0:
            raise SingularSplit(which) from None
        try:
            return cholesky_upper(m + shift * np.eye(m.shape[0])), True
        except SingularMatrix:
            raise SingularSplit(which) from None


def schur_complement(g11, g21, ra) -> np.ndarray:
    """``D = g11 - g21' A^-1 g21`` given the upper Cholesky factor of A."""
    w = solve_triangular(ra, g21, trans="T", check_finite=False)
    return g11 - w.T @ w


def _block_solve(g11, g21, g22, h1, h2, Y, ridge):
    """Two-block solve from the Gram blocks of ``[h1 h2]``.

    A = h2'h2 and D = h1'C h1 with C = I - h2 A^-1 h2' are factored, never
    inverted; C itself is never built (D comes from the Gram blocks).
    """
    ra, ridged_a = _factor_with_ridge(g22, ridge, "A")
    b = cho_solve_upper(ra, h2.T @ Y)
    d = schur_complement(g11, g21, ra)
    rd, ridged_d = _factor_with_ridge(d, ridge, "D")
    rhs = h1.T @ (Y - h2 @ b)
    beta1 = cho_solve_upper(rd, rhs)
    if ridged_d:
        # D is singular exactly when H2 lies in span(H1); refining against the
        # unshifted D removes the ridge bias on its range.
        for _ in range(REFINE_STEPS):
            beta1 += cho_solve_upper(rd, rhs - d @ beta1)
    beta2 = b - cho_solve_upper(ra, g21 @ beta1)
    return beta1, beta2, ridged_a or ridged_d


def solve_block_split(H1, H2, Y, ridge: float = RIDGE_SCALE) -> tuple[np.ndarray, np.ndarray]:
    """Output weights for ``[H1 H2]`` via the block-inverse identities.

    Returns ``(beta1, beta2)``. A singular ``A = H2'H2`` or Schur complement
    ``D`` is retried once with ``ridge * trace/dim`` on its diagonal; if it is
    still singular :class:`SingularSplit` is raised.
    """
    H1, Y = _check_system(H1, Y)
    H2, _ = _check_system(H2, Y)
    if H1.shape[0] < H1.shape[1] + H2.shape[1]:
        raise ValueError("block solve needs at least as many rows as columns")
    beta1, beta2, _ = _block_solve(gram(H1), H2.T @ H1, gram(H2), H1, H2, Y, ridge)
    return beta1, beta2


def _fall_back(H, Y, diag: SolveDiagnostics):
    beta, diag.used_svd = _direct(H, Y)
    diag.fallback_to_direct = True
    return beta, diag


def _solve_df(H, Y, split, ridge):
    L = H.shape[1]
    diag = SolveDiagnostics(str(DfSplit(split)), (split, L - split))
    h1, h2 = H[:, :split], H[:, split:]
    try:
        beta1, beta2, diag.ridge_applied = _block_solve(
            gram(h1), h2.T @ h1, gram(h2), h1, h2, Y, ridge
        )
    except SingularSplit:
        return _fall_back(H, Y, diag)
    return np.vstack([beta1, beta2]), diag


def _solve_rank(H, Y, strategy: RankBased, ridge):
    n, L = H.shape
    g = gram(H, upper_only=True)
    floor = GRAM_PIVOT_FLOOR * max(n, L) * EPS
    r_fac, perm = _pstrf(g, max(strategy.rank_tol, math.sqrt(floor)))
    r = perm.rank
    diag = SolveDiagnostics(str(strategy), (r, L - r), rank=r)
    if r == 0:
        return _fall_back(H, Y, diag)
    order = perm.order
    s1 = r
    if r == L and strategy.balanced and L > 1:
        s1 = math.ceil(L / 2)
    diag.split = (s1, L - s1)
    if s1 == L:
        # No dependent columns: A and B are empty, C is the identity and
        # D = H1'H1, already factored by the pivoted Cholesky.
        beta_p = cho_solve_upper(r_fac, (H.T @ Y)[order])
    else:
        p1, p2 = order[:s1], order[s1:]
        lower = np.tril_indices(L, -1)
        g[lower] = g.T[lower]
        try:
            beta1, beta2, diag.ridge_applied = _block_solve(
                g[np.ix_(p1, p1)], g[np.ix_(p2, p1)], g[np.ix_(p2, p2)],
                H[:, p1], H[:, p2], Y, ridge,
            )
        except SingularSplit:
            return _fall_back(H, Y, diag)
        beta_p = np.vstack([beta1, beta2])
    return invert_permutation_rows(beta_p, perm), diag


def solve_output_weights(
    H, Y, strategy: SolverStrategy, ridge: float = RIDGE_SCALE
) -> tuple[np.ndarray, SolveDiagnostics]:
    """Compute output weights for a given hidden matrix with one strategy.

    Block strategies that hit a singular split fall back to the direct
    solver; the diagnostics record it.
    """
    H, Y = _check_system(H, Y)
    n, L = H.shape
    if isinstance(strategy, DfSplit) and not strategy.split_index < L:
        raise ValueError(f"split index {strategy.split_index} must be < hidden nodes {L}")
    if isinstance(strategy, (DfSplit, RankBased)) and n < L:
        raise ValueError(
            f"block strategies need N >= L (got N={n}, L={L}); use the direct strategy"
        )
    start = time.perf_counter()
    if isinstance(strategy, Direct):
        beta, used_svd = _direct(H, Y)
        diag = SolveDiagnostics(str(strategy), (L, 0), used_svd=used_svd)
    elif isinstance(strategy, DfSplit):
        beta, diag = _solve_df(H, Y, strategy.split_index, ridge)
    elif isinstance(strategy, RankBased):
        beta, diag = _solve_rank(H, Y, strategy, ridge)
    else:
        raise TypeError(f"not a solver strategy: {strategy!r}")
    diag.solve_seconds = time.perf_counter() - start
    return beta, diag


def train(
    params: ElmParams, X, Y, strategy: SolverStrategy = Direct()
) -> tuple[ElmModel, SolveDiagnostics]:
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if X.shape[1] != params.n_inputs:
        raise ValueError(f"X has {X.shape[1]} features, params say {params.n_inputs}")
    if Y.shape[1] != params.n_outputs:
        raise ValueError(f"Y has {Y.shape[1]} columns, params say {params.n_outputs}")
    hidden = init_hidden(params)
    start = time.perf_counter()
    H = hidden_matrix(hidden, X)
    hidden_seconds = time.perf_counter() - start
    beta, diag = solve_output_weights(H, Y, strategy)
    diag.hidden_seconds = hidden_seconds
    beta.flags.writeable = False
    return ElmModel(params, hidden, beta), diag


def predict(model: ElmModel, X) -> np.ndarray:
    return hidden_matrix(model.hidden, X) @ model.beta


def accuracy(pred, Y) -> float:
    """Fraction of rows whose argmax matches the one-hot target."""
    pred = np.asarray(pred, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if pred.ndim != 2 or pred.shape != Y.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {Y.shape}")
    if not (((Y == 0.0) | (Y == 1.0)).all() and (Y.sum(axis=1) == 1.0).all()):
        raise ValueError("targets must be one-hot")
    return float(np.mean(pred.argmax(axis=1) == Y.argmax(axis=1)))
