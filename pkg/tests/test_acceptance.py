"""Acceptance gate: one PASS/FAIL line per criterion.

Run under pytest (the lines are repeated in the terminal summary) or
directly with ``python tests/test_acceptance.py``. Set RBP_ELM_GINA to a
GINA csv or libsvm file to add the real-data accuracy check; without it
that sub-check is reported as skipped and the GINA-shaped synthetic set
is used.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from rbp_elm import verify
from rbp_elm.bench import run_trials, sweep_df_splits
from rbp_elm.data import Dataset, load_csv, load_libsvm, normalize, synth
from rbp_elm.elm import (
    DfSplit,
    Direct,
    ElmParams,
    RankBased,
    accuracy,
    hidden_matrix,
    init_hidden,
    predict,
    solve_output_weights,
    train,
)
from rbp_elm.linalg import pinv_svd

SEED = 0
GINA_SHAPE = (3468, 970, 2)
LABEL_NODES = (500, 1000, 1500, 2000)
TIMING_NODES = 1500
TIMING_SPLITS = (150, 750, 1350)
TIMING_TRIALS = 10
GINA_ENV = "RBP_ELM_GINA"

RESULTS: list[str] = []


def record(number: int, passed: bool, text: str) -> bool:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {text}"
    RESULTS.append(line)
    print(line)
    return passed


def record_check(number: int, result: verify.CheckResult) -> bool:
    return record(number, result.passed, result.line().split(" ", 1)[1])


@pytest.fixture(scope="module")
def gina_like() -> Dataset:
    return synth(*GINA_SHAPE, seed=SEED)


def test_oracle_equivalence():
    assert record_check(1, verify.check_oracle_equivalence(SEED, 200, tol=1e-6))


def test_rank_deficient():
    assert record_check(2, verify.check_rank_deficient(SEED, 100, tol=1e-6))


def test_u_block_cross_check():
    assert record_check(3, verify.check_u_blocks(SEED, 50, tol=1e-8))


def test_projector_properties():
    assert record_check(4, verify.check_projector(SEED, 50, tol=1e-8, d_tol=1e-12))


def _load_gina(path: str) -> Dataset:
    p = Path(path)
    if p.suffix in (".libsvm", ".svm", ".txt"):
        return normalize(load_libsvm(p))
    return normalize(load_csv(p))


def _label_agreement(ds: Dataset):
    """Per L: identical hidden weights, DF at three splits and rank-based."""
    rows = []
    for L in LABEL_NODES:
        H = hidden_matrix(init_hidden(ElmParams(ds.n_features, L, ds.n_classes, seed=SEED)), ds.X)
        beta, diag = solve_output_weights(H, ds.Y, RankBased())
        ref = (H @ beta).argmax(axis=1)
        mismatches = 0
        for s in sorted({max(1, L // 10), L // 2, L - L // 10}):
            b, _ = solve_output_weights(H, ds.Y, DfSplit(s))
            mismatches += int(np.count_nonzero((H @ b).argmax(axis=1) != ref))
        rows.append((L, diag.rank, mismatches, accuracy(H @ beta, ds.Y)))
    return rows


def test_accuracy_equality(gina_like):
    rows = _label_agreement(gina_like)
    ok = all(m == 0 for _, _, m, _ in rows)
    detail = "; ".join(f"L={L} rank={r} mismatched labels={m} acc={a:.4f}" for L, r, m, a in rows)
    parts = [ok]
    path = os.environ.get(GINA_ENV)
    if path:
        gina = _load_gina(path)
        grows = _label_agreement(gina)
        g_ok = all(m == 0 for _, _, m, _ in grows)
        acc2000 = grows[-1][3]
        in_band = 0.96 <= acc2000 <= 1.0
        parts += [g_ok, in_band]
        detail += f" | GINA labels {'identical' if g_ok else 'differ'}, acc at L=2000 {acc2000:.4f} (band [0.96, 1.0])"
    else:
        detail += f" | GINA sub-check skipped ({GINA_ENV} not set)"
    assert record(5, all(parts), f"synthetic {'x'.join(map(str, GINA_SHAPE))}, DF vs rank-based: {detail}")


def test_timing_stability(gina_like):
    sweep = sweep_df_splits(gina_like, TIMING_NODES, TIMING_SPLITS, trials=TIMING_TRIALS, base_seed=SEED)
    rank = run_trials(gina_like, TIMING_NODES, RankBased(), trials=TIMING_TRIALS, base_seed=SEED)
    df_max = max(s.mean_seconds for s in sweep.stats)
    means = ", ".join(f"{s.strategy} {s.mean_seconds:.4f}s" for s in sweep.stats)
    ok = rank.mean_seconds < df_max and rank.cv < 0.25
    assert record(
        6, ok,
        f"L={TIMING_NODES}, {TIMING_TRIALS} trials: rank-based mean {rank.mean_seconds:.4f}s "
        f"(solve {rank.mean_solve_seconds:.4f}s, cv {rank.cv:.1%}) vs DF means [{means}], "
        f"max {df_max:.4f}s; need mean < max and cv < 25%",
    )


def _degenerate_cases():
    out = {}
    strategies = (Direct(), DfSplit(2), RankBased(), RankBased(balanced=True))

    # all-zero hidden matrix: rank 0, block strategies fall back to direct
    H0, Y0 = np.zeros((12, 5)), np.eye(3)[np.arange(12) % 3]
    ok = True
    for strat in strategies:
        beta, diag = solve_output_weights(H0, Y0, strat)
        ok &= bool(np.all(beta == 0.0) and np.all(np.isfinite(beta)))
        if not isinstance(strat, Direct):
            ok &= diag.fallback_to_direct
        if isinstance(strat, RankBased):
            ok &= diag.rank == 0
    out["zero H"] = ok

    # constant features normalize to 0, so every hidden row is identical
    X = np.full((20, 4), 3.0)
    ds = normalize(Dataset(X, np.eye(2)[np.arange(20) % 2], ("a", "b")))
    ok = bool(np.all(ds.X == 0.0))
    for strat in strategies:
        model, diag = train(ElmParams(4, 6, 2, seed=1), ds.X, ds.Y, strat)
        H = hidden_matrix(model.hidden, ds.X)
        best = np.linalg.norm(H @ (pinv_svd(H) @ ds.Y) - ds.Y)
        ok &= bool(np.linalg.norm(H @ model.beta - ds.Y) <= best + 1e-6 * (1 + np.linalg.norm(ds.Y)))
        if isinstance(strat, RankBased):
            ok &= diag.rank == 1
    out["constant features"] = ok

    # a single class: one output column of ones, perfect accuracy
    single = synth(40, 3, 1, seed=2)
    ok = single.Y.shape == (40, 1)
    for strat in strategies:
        model, _ = train(ElmParams(3, 8, 1, seed=0), single.X, single.Y, strat)
        ok &= accuracy(predict(model, single.X), single.Y) == 1.0
    out["single class"] = ok

    s = run_trials(synth(60, 4, 2), 10, RankBased(), trials=1)
    out["trials=1"] = s.min_seconds == s.mean_seconds == s.max_seconds and s.stddev_seconds == 0.0
    return out


def test_degenerate_inputs():
    cases = _degenerate_cases()
    detail = ", ".join(f"{k} {'ok' if v else 'broken'}" for k, v in cases.items())
    assert record(7, all(cases.values()), detail)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
