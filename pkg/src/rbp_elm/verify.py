"""Randomized property checks for the block solvers.

Every check draws its instances from ``numpy.random.default_rng(seed + i)``
so a failing case can be replayed from the seed printed with it. The
explicit-inverse and projector constructions here are test-scale only; the
production solvers never build them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import elm
from .elm import DfSplit, RankBased, schur_complement
from .linalg import cholesky_upper, gram, pinv_svd, rank_revealing_permutation, svd_rank

MAX_N, MAX_L, MAX_M = 200, 50, 5


@dataclass
class CheckResult:
    name: str
    cases: int
    max_error: float
    tolerance: float
    failing_seed: int | None = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.failing_seed is None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: {self.cases} cases, max error {self.max_error:.3e} (tol {self.tolerance:.0e})"
        if not self.passed:
            text += f", failing seed {self.failing_seed}"
            if self.detail:
                text += f" [{self.detail}]"
        return text


def rel_inf(a: np.ndarray, ref: np.ndarray) -> float:
    """Max-abs-entry error relative to the max-abs entry of ``ref``."""
    return float(np.max(np.abs(a - ref)) / max(np.max(np.abs(ref)), 1e-300))


def rel_fro(a: np.ndarray, ref: np.ndarray) -> float:
    return float(np.linalg.norm(a - ref) / max(np.linalg.norm(ref), 1e-300))


def full_rank_instance(rng: np.random.Generator):
    n = int(rng.integers(20, MAX_N + 1))
    L = int(rng.integers(4, min(MAX_L, n) + 1))
    m = int(rng.integers(1, MAX_M + 1))
    return rng.normal(size=(n, L)), rng.normal(size=(n, m))


def rank_deficient_instance(rng: np.random.Generator):
    """H with ``k`` columns that are combinations of two independent ones."""
    n = int(rng.integers(20, MAX_N + 1))
    L = int(rng.integers(4, min(MAX_L, n) + 1))
    m = int(rng.integers(1, MAX_M + 1))
    k = int(rng.integers(1, L // 4 + 2))
    dep = rng.choice(L, size=k, replace=False)
    indep = np.setdiff1d(np.arange(L), dep)
    H = np.empty((n, L))
    H[:, indep] = rng.normal(size=(n, indep.size))
    for j in dep:
        a, b = rng.choice(indep, size=2, replace=False)
        H[:, j] = rng.normal() * H[:, a] + rng.normal() * H[:, b]
    return H, rng.normal(size=(n, m)), L - k


def small_split_instance(rng: np.random.Generator):
    L = int(rng.integers(2, 11))
    n = int(rng.integers(2 * L, 41))
    m = int(rng.integers(1, 4))
    s = int(rng.integers(1, L))
    H = rng.normal(size=(n, L))
    return H[:, :s], H[:, s:], rng.normal(size=(n, m))


def u_block_solution(H1, H2, Y) -> np.ndarray:
    """Stacked output weights from the explicit 2x2 block inverse."""
    g11, g12 = H1.T @ H1, H1.T @ H2
    g21, g22 = H2.T @ H1, H2.T @ H2
    inv = np.linalg.inv
    u1 = inv(g11 - g12 @ inv(g22) @ g21)
    u4 = inv(g22 - g21 @ inv(g11) @ g12)
    u2 = -inv(g11) @ g12 @ u4
    u3 = -inv(g22) @ g21 @ u1
    U = np.block([[u1, u2], [u3, u4]])
    return U @ np.vstack([H1.T @ Y, H2.T @ Y])


def projector(H2) -> np.ndarray:
    """``C = I - H2 (H2'H2)^-1 H2'`` as an explicit N x N matrix."""
    return np.eye(H2.shape[0]) - H2 @ np.linalg.solve(H2.T @ H2, H2.T)


def abcd_literal_solution(H1, H2, Y) -> np.ndarray:
    """Stacked output weights from A, B, C, D built exactly as written,
    including the N x N projector C."""
    A = H2.T @ H2
    B = np.linalg.solve(A, H2.T @ Y)
    C = projector(H2)
    D = H1.T @ C @ H1
    beta1 = np.linalg.solve(D, H1.T @ (Y - H2 @ B))
    beta2 = B - np.linalg.solve(A, H2.T @ H1 @ beta1)
    return np.vstack([beta1, beta2])


def production_schur(H1, H2) -> np.ndarray:
    """D as the solver computes it, from Gram blocks and the factor of A."""
    return schur_complement(gram(H1), H2.T @ H1, cholesky_upper(gram(H2)))


Solver = Callable[..., tuple]


def check_oracle_equivalence(seed: int, cases: int, solver: Solver | None = None, tol: float = 1e-6) -> CheckResult:
    """Every DF split and the rank-based solver reproduce ``pinv(H) @ Y``."""
    solver = solver or elm.solve_output_weights
    worst, bad, detail = 0.0, None, ""
    for i in range(cases):
        rng = np.random.default_rng(seed + i)
        H, Y = full_rank_instance(rng)
        ref = pinv_svd(H) @ Y
        strategies = [RankBased()] + [DfSplit(s) for s in range(1, H.shape[1])]
        for strat in strategies:
            beta, _ = solver(H, Y, strat)
            err = rel_inf(beta, ref)
            worst = max(worst, err)
            if err > tol and bad is None:
                bad, detail = seed + i, str(strat)
    return CheckResult("oracle equivalence", cases, worst, tol, bad, detail)


def check_rank_deficient(seed: int, cases: int, solver: Solver | None = None, tol: float = 1e-6) -> CheckResult:
    """Rank-based fitted values match the SVD oracle and the rank drops below L."""
    solver = solver or elm.solve_output_weights
    worst, bad, detail = 0.0, None, ""
    for i in range(cases):
        rng = np.random.default_rng(seed + i)
        H, Y, rank = rank_deficient_instance(rng)
        fitted_ref = H @ (pinv_svd(H) @ Y)
        beta, diag = solver(H, Y, RankBased())
        err = rel_fro(H @ beta, fitted_ref)
        worst = max(worst, err)
        if bad is None and (err > tol or diag.rank is None or diag.rank >= H.shape[1]):
            bad, detail = seed + i, f"rank {diag.rank} of {H.shape[1]}"
    return CheckResult("rank-deficient fitted values", cases, worst, tol, bad, detail)


def check_u_blocks(seed: int, cases: int, tol: float = 1e-8) -> CheckResult:
    """Explicit U1..U4 block inverse agrees with the A/B/C/D path, both as
    the solver runs it and with C materialized."""
    worst, bad = 0.0, None
    for i in range(cases):
        H1, H2, Y = small_split_instance(np.random.default_rng(seed + i))
        b1, b2 = elm.solve_block_split(H1, H2, Y)
        ours = np.vstack([b1, b2])
        u = u_block_solution(H1, H2, Y)
        scale = max(1.0, float(np.max(np.abs(ours))))
        err = max(
            float(np.max(np.abs(ours - u))),
            float(np.max(np.abs(abcd_literal_solution(H1, H2, Y) - u))),
        ) / scale
        worst = max(worst, err)
        if err > tol and bad is None:
            bad = seed + i
    return CheckResult("U-block cross-check", cases, worst, tol, bad)


def check_projector(seed: int, cases: int, tol: float = 1e-8, d_tol: float = 1e-12) -> CheckResult:
    """C is a symmetric idempotent; D is symmetric and equals H1' C H1."""
    worst, bad, detail = 0.0, None, ""
    for i in range(cases):
        H1, H2, _ = small_split_instance(np.random.default_rng(seed + i))
        C = projector(H2)
        d = production_schur(H1, H2)
        scale = max(1.0, float(np.max(np.abs(d))))
        errs = {
            "C symmetric": float(np.max(np.abs(C - C.T))),
            "C idempotent": float(np.max(np.abs(C @ C - C))),
            "D symmetric": float(np.max(np.abs(d - d.T))) / scale,
            "D = H1'CH1": float(np.max(np.abs(d - H1.T @ C @ H1))) / scale,
        }
        worst = max(worst, max(errs.values()))
        limits = {"C symmetric": tol, "C idempotent": tol, "D symmetric": d_tol, "D = H1'CH1": tol}
        for key, err in errs.items():
            if err > limits[key] and bad is None:
                bad, detail = seed + i, key
    return CheckResult("projector properties", cases, worst, tol, bad, detail)


def check_penrose(seed: int, cases: int, tol: float = 1e-8) -> CheckResult:
    """The four Penrose conditions on pinv_svd, including rank-deficient input."""
    worst, bad = 0.0, None
    for i in range(cases):
        rng = np.random.default_rng(seed + i)
        rows, cols = (int(x) for x in rng.integers(1, 51, size=2))
        r = int(rng.integers(1, min(rows, cols) + 1))
        A = rng.normal(size=(rows, r)) @ rng.normal(size=(r, cols))
        X = pinv_svd(A)
        AX, XA = A @ X, X @ A
        err = max(
            rel_inf(A @ X @ A, A),
            rel_inf(X @ A @ X, X),
            rel_inf(AX.T, AX),
            rel_inf(XA.T, XA),
        )
        worst = max(worst, err)
        if err > tol and bad is None:
            bad = seed + i
    return CheckResult("Penrose conditions", cases, worst, tol, bad)


def check_rank_agreement(seed: int, cases: int) -> CheckResult:
    """Pivoted QR rank equals the SVD singular-value count."""
    bad, detail = None, ""
    for i in range(cases):
        H, _, rank = rank_deficient_instance(np.random.default_rng(seed + i))
        qr_rank = rank_revealing_permutation(H).rank
        sv_rank = svd_rank(H)
        if not qr_rank == sv_rank == rank and bad is None:
            bad, detail = seed + i, f"qr {qr_rank} svd {sv_rank} built {rank}"
    return CheckResult("rank agreement", cases, 0.0, 0.0, bad, detail)


def run_all(seed: int = 0, cases: int = 200, solver: Solver | None = None) -> list[CheckResult]:
    return [
        check_oracle_equivalence(seed, cases, solver),
        check_rank_deficient(seed, cases, solver),
        check_u_blocks(seed, cases),
        check_projector(seed, cases),
        check_penrose(seed, cases),
        check_rank_agreement(seed, cases),
    ]
