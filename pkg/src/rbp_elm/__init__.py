"""Extreme learning machines with direct, split-block and rank-based
output-weight solvers, plus a timing harness."""

from .data import Dataset, DataFormatError, load_csv, load_libsvm, normalize, synth
from .elm import (
    Direct,
    DfSplit,
    ElmModel,
    ElmParams,
    RankBased,
    SingularSplit,
    SolveDiagnostics,
    accuracy,
    parse_strategy,
    predict,
    solve_output_weights,
    train,
)
from .linalg import ColumnPermutation, SingularMatrix, pinv_svd, rank_revealing_permutation

__all__ = [
    "ColumnPermutation", "DataFormatError", "Dataset", "DfSplit", "Direct", "ElmModel",
    "ElmParams", "RankBased", "SingularMatrix", "SingularSplit", "SolveDiagnostics",
    "accuracy", "load_csv", "load_libsvm", "normalize", "parse_strategy", "pinv_svd",
    "predict", "rank_revealing_permutation", "solve_output_weights", "synth", "train",
]
__version__ = "0.1.0"
