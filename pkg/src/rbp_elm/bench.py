"""Repeated-trial timing of the ELM solvers.

Each trial draws fresh hidden weights (seed = base_seed + trial index), builds
the hidden matrix and solves for the output weights; wall time covers both,
and the solve-only part is kept separately. Trials within one call run
sequentially on the calling thread.
"""

from __future__ import annotations

import csv
import json
import platform
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .data import Dataset
from .elm import (
    DfSplit,
    ElmParams,
    SolverStrategy,
    accuracy,
    hidden_matrix,
    init_hidden,
    parse_strategy,
    solve_output_weights,
)

SCHEMA_VERSION = 1
DEFAULT_TRIALS = 50
DEFAULT_SPLIT_FRACTIONS = (0.1, 0.5, 0.9)


@dataclass
class TrialRecord:
    seed: int
    seconds: float
    solve_seconds: float
    hidden_seconds: float
    accuracy: float
    rank: int | None
    split: tuple[int, int]
    ridge_applied: bool = False
    fallback_to_direct: bool = False


@dataclass
class TrialStats:
    strategy: str
    hidden_nodes: int
    trials: int
    mean_seconds: float
    min_seconds: float
    max_seconds: float
    stddev_seconds: float
    mean_solve_seconds: float
    mean_accuracy: float
    records: list[TrialRecord] = field(default_factory=list)

    @classmethod
    def from_records(cls, strategy: str, hidden_nodes: int, records: Sequence[TrialRecord]) -> TrialStats:
        if not records:
            raise ValueError("need at least one trial")
        secs = [r.seconds for r in records]
        lo, hi = min(secs), max(secs)
        return cls(
            strategy=strategy,
            hidden_nodes=hidden_nodes,
            trials=len(records),
            # fmean can land an ulp outside [min, max]
            mean_seconds=min(max(statistics.fmean(secs), lo), hi),
            min_seconds=lo,
            max_seconds=hi,
            stddev_seconds=statistics.stdev(secs) if len(secs) > 1 else 0.0,
            mean_solve_seconds=statistics.fmean(r.solve_seconds for r in records),
            mean_accuracy=statistics.fmean(r.accuracy for r in records),
            records=list(records),
        )

    @property
    def cv(self) -> float:
        """Coefficient of variation of the trial times."""
        return self.stddev_seconds / self.mean_seconds if self.mean_seconds > 0 else 0.0


@dataclass
class SplitSweep:
    hidden_nodes: int
    stats: list[TrialStats]
    best_split: int
    worst_split: int


@dataclass
class DfSweep:
    """Sweep of DF split points; ``None`` uses fractions of L."""

    splits: tuple[int, ...] | None = None

    def points(self, hidden_nodes: int) -> list[int]:
        if self.splits is not None:
            return list(self.splits)
        pts = (min(max(round(f * hidden_nodes), 1), hidden_nodes - 1) for f in DEFAULT_SPLIT_FRACTIONS)
        return sorted(set(pts))

    def __str__(self) -> str:
        if self.splits is None:
            return "df-sweep"
        return "df-sweep:" + ",".join(map(str, self.splits))


BenchStrategy = Union[SolverStrategy, DfSweep]


def parse_bench_strategy(text: str) -> BenchStrategy:
    name, _, arg = text.strip().partition(":")
    if name == "df-sweep":
        if not arg:
            return DfSweep()
        try:
            return DfSweep(tuple(int(x) for x in arg.split(",")))
        except ValueError:
            raise ValueError(f"bad split list in {text!r}") from None
    return parse_strategy(text)


@dataclass
class BenchmarkReport:
    machine: str
    dataset: dict
    stats: list[TrialStats]
    node_counts: list[int]
    split_points: dict[int, list[int]] = field(default_factory=dict)
    best_splits: dict[int, int] = field(default_factory=dict)
    worst_splits: dict[int, int] = field(default_factory=dict)
    parallel_contaminated: bool = False

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "machine": self.machine,
            "dataset": dict(self.dataset),
            "parallel_contaminated": self.parallel_contaminated,
            "sweep": {
                "node_counts": list(self.node_counts),
                "split_points": {str(k): v for k, v in self.split_points.items()},
                "best_splits": {str(k): v for k, v in self.best_splits.items()},
                "worst_splits": {str(k): v for k, v in self.worst_splits.items()},
            },
            "stats": [asdict(s) for s in self.stats],
        }

    @classmethod
    def from_dict(cls, d: dict) -> BenchmarkReport:
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        sweep = d["sweep"]
        stats = []
        for s in d["stats"]:
            records = [
                TrialRecord(**{**r, "split": tuple(r["split"])}) for r in s["records"]
            ]
            stats.append(TrialStats(**{**s, "records": records}))
        return cls(
            machine=d["machine"],
            dataset=d["dataset"],
            stats=stats,
            node_counts=list(sweep["node_counts"]),
            split_points={int(k): v for k, v in sweep["split_points"].items()},
            best_splits={int(k): v for k, v in sweep["best_splits"].items()},
            worst_splits={int(k): v for k, v in sweep["worst_splits"].items()},
            parallel_contaminated=d["parallel_contaminated"],
        )


def describe_machine() -> str:
    return f"{platform.platform()}; {platform.processor() or platform.machine()}; numpy {np.__version__}"


def _one_trial(ds: Dataset, hidden_nodes: int, strategy: SolverStrategy, seed: int) -> TrialRecord:
    params = ElmParams(ds.n_features, hidden_nodes, ds.n_classes, seed=seed)
    hidden = init_hidden(params)
    start = time.perf_counter()
    H = hidden_matrix(hidden, ds.X)
    hidden_done = time.perf_counter()
    beta, diag = solve_output_weights(H, ds.Y, strategy)
    end = time.perf_counter()
    return TrialRecord(
        seed=seed,
        seconds=end - start,
        solve_seconds=diag.solve_seconds,
        hidden_seconds=hidden_done - start,
        accuracy=accuracy(H @ beta, ds.Y),
        rank=diag.rank,
        split=diag.split,
        ridge_applied=diag.ridge_applied,
        fallback_to_direct=diag.fallback_to_direct,
    )


def run_trials(
    ds: Dataset,
    hidden_nodes: int,
    strategy: SolverStrategy,
    trials: int = DEFAULT_TRIALS,
    base_seed: int = 0,
    warmup: bool = True,
) -> TrialStats:
    """Time ``trials`` independent trainings of one strategy at one width."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if warmup:
        _one_trial(ds, hidden_nodes, strategy, base_seed % 2**64)
    records = [
        _one_trial(ds, hidden_nodes, strategy, (base_seed + i) % 2**64)
        for i in range(trials)
    ]
    return TrialStats.from_records(str(strategy), hidden_nodes, records)


def _split_extremes(hidden_nodes: int, stats: list[TrialStats]) -> SplitSweep:
    splits = [int(s.strategy.split(":")[1]) for s in stats]
    times = [s.mean_seconds for s in stats]
    return SplitSweep(
        hidden_nodes,
        stats,
        best_split=splits[int(np.argmin(times))],
        worst_split=splits[int(np.argmax(times))],
    )


def sweep_df_splits(
    ds: Dataset,
    hidden_nodes: int,
    split_points: Iterable[int],
    trials: int = DEFAULT_TRIALS,
    base_seed: int = 0,
    warmup: bool = True,
) -> SplitSweep:
    """Run the DF strategy at each split point and pick the fastest/slowest."""
    points = list(split_points)
    if not points:
        raise ValueError("no split points given")
    for s in points:
        if not 0 < s < hidden_nodes:
            raise ValueError(f"split {s} outside (0, {hidden_nodes})")
    stats = [run_trials(ds, hidden_nodes, DfSplit(s), trials, base_seed, warmup) for s in points]
    return _split_extremes(hidden_nodes, stats)


def sweep_nodes(
    ds: Dataset,
    node_counts: Sequence[int],
    strategies: Sequence[BenchStrategy],
    trials: int = DEFAULT_TRIALS,
    base_seed: int = 0,
    machine: str | None = None,
    parallel: bool = False,
    warmup: bool = True,
) -> BenchmarkReport:
    """Cross product of hidden-node counts and strategies in one report.

    With ``parallel=True`` independent (L, strategy) cells run concurrently
    and the report is flagged as timing-contaminated.
    """
    if not node_counts or not strategies:
        raise ValueError("need at least one node count and one strategy")
    jobs: list[tuple[int, SolverStrategy]] = []
    split_points: dict[int, list[int]] = {}
    for L in node_counts:
        if L > ds.n_samples and any(not _is_direct(s) for s in strategies):
            raise ValueError(f"hidden nodes {L} exceed the {ds.n_samples} samples")
        for strat in strategies:
            if isinstance(strat, DfSweep):
                pts = strat.points(L)
                for s in pts:
                    if not 0 < s < L:
                        raise ValueError(f"split {s} outside (0, {L})")
                split_points[L] = pts
                jobs.extend((L, DfSplit(s)) for s in pts)
            else:
                jobs.append((L, strat))

    def run(job):
        return run_trials(ds, job[0], job[1], trials, base_seed, warmup)

    if parallel:
        with ThreadPoolExecutor() as pool:
            stats = list(pool.map(run, jobs))
    else:
        stats = [run(job) for job in jobs]

    best, worst = {}, {}
    for L, pts in split_points.items():
        swept = [s for s in stats if s.hidden_nodes == L and s.strategy in {f"df:{p}" for p in pts}]
        ext = _split_extremes(L, swept)
        best[L], worst[L] = ext.best_split, ext.worst_split
    return BenchmarkReport(
        machine=machine or describe_machine(),
        dataset=ds.describe(),
        stats=stats,
        node_counts=list(node_counts),
        split_points=split_points,
        best_splits=best,
        worst_splits=worst,
        parallel_contaminated=parallel,
    )


def _is_direct(strategy) -> bool:
    return str(strategy) == "direct"


def _marker(report: BenchmarkReport, s: TrialStats) -> str:
    if s.strategy.startswith("df:") and s.hidden_nodes in report.best_splits:
        split = int(s.strategy.split(":")[1])
        if split == report.best_splits[s.hidden_nodes]:
            return "best"
        if split == report.worst_splits[s.hidden_nodes]:
            return "worst"
    return ""


CSV_COLUMNS = (
    "strategy", "hidden_nodes", "trials", "mean_seconds", "min_seconds",
    "max_seconds", "stddev_seconds", "mean_solve_seconds", "mean_accuracy", "marker",
)


def emit_report(report: BenchmarkReport, fmt: str, path) -> Path:
    if not report.stats:
        raise ValueError("report has no entries")
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    elif fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for s in report.stats:
                w.writerow([
                    s.strategy, s.hidden_nodes, s.trials, repr(s.mean_seconds),
                    repr(s.min_seconds), repr(s.max_seconds), repr(s.stddev_seconds),
                    repr(s.mean_solve_seconds), repr(s.mean_accuracy), _marker(report, s),
                ])
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def load_report(path) -> BenchmarkReport:
    return BenchmarkReport.from_dict(json.loads(Path(path).read_text()))


def emit_plot_data(report: BenchmarkReport, directory) -> list[Path]:
    """Write one tab-separated ``L mean min max`` series per strategy.

    DF sweeps additionally get ``df-best`` and ``df-worst`` series built from
    the fastest and slowest split at each L.
    """
    if not report.stats:
        raise ValueError("report has no entries")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    series: dict[str, list[TrialStats]] = {}
    for s in report.stats:
        series.setdefault(s.strategy, []).append(s)
        mark = _marker(report, s)
        if mark:
            series.setdefault(f"df-{mark}", []).append(s)
    paths = []
    for label, entries in series.items():
        p = directory / (label.replace(":", "_").replace(",", "-") + ".tsv")
        lines = ["hidden_nodes\tmean_seconds\tmin_seconds\tmax_seconds"]
        for s in sorted(entries, key=lambda e: e.hidden_nodes):
            lines.append(f"{s.hidden_nodes}\t{s.mean_seconds!r}\t{s.min_seconds!r}\t{s.max_seconds!r}")
        p.write_text("\n".join(lines) + "\n")
        paths.append(p)
    return paths


def format_summary(report: BenchmarkReport) -> str:
    head = f"{'strategy':<16}{'L':>6}{'trials':>8}{'mean s':>10}{'min s':>10}{'max s':>10}{'cv':>7}{'acc':>8}"
    lines = [f"dataset {report.dataset.get('name', '')} "
             f"N={report.dataset.get('N')} n={report.dataset.get('n')} m={report.dataset.get('m')}",
             f"machine {report.machine}"]
    if report.parallel_contaminated:
        lines.append("WARNING: cells ran in parallel; times are parallel-contaminated")
    lines.append(head)
    for s in report.stats:
        mark = _marker(report, s)
        lines.append(
            f"{s.strategy:<16}{s.hidden_nodes:>6}{s.trials:>8}{s.mean_seconds:>10.4f}"
            f"{s.min_seconds:>10.4f}{s.max_seconds:>10.4f}{s.cv:>7.1%}{s.mean_accuracy:>8.4f}"
            + (f"  <- {mark} split" if mark else "")
        )
    return "\n".join(lines)
