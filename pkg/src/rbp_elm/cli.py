"""Command-line entry point: ``rbp-elm {train,bench,verify}``.

Exit codes: 0 success, 1 runtime failure (data, solve, I/O or a failed
check), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys

import numpy as np

from . import bench, verify
from .bench import DfSweep, parse_bench_strategy
from .data import DataFormatError, Dataset, load_csv, load_libsvm, normalize, synth
from .elm import DfSplit, ElmParams, accuracy, parse_strategy, predict, train

SEED_ENV = "RBP_ELM_SEED"
_SYNTH = re.compile(r"^(\d+)x(\d+)x(\d+)$")


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _synth_spec(text: str) -> tuple[int, int, int]:
    m = _SYNTH.match(text.strip())
    if not m or min(int(g) for g in m.groups()) < 1:
        raise argparse.ArgumentTypeError(f"expected NxnxC with positive integers, got {text!r}")
    return tuple(int(g) for g in m.groups())


def _node_list(text: str) -> list[int]:
    try:
        nodes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad node list {text!r}") from None
    if not nodes or min(nodes) < 1:
        raise argparse.ArgumentTypeError(f"node counts must be positive integers, got {text!r}")
    return nodes


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _label_column(text: str):
    if text == "last":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"label column must be an index or 'last', got {text!r}") from None


def _add_data_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--synth", type=_synth_spec, metavar="NxnxC", help="synthetic Gaussian clusters")
    src.add_argument("--data", metavar="PATH", help="dataset file")
    p.add_argument("--format", choices=("csv", "libsvm"), default=None,
                   help="file format (default: from the extension, csv otherwise)")
    p.add_argument("--label-column", type=_label_column, default="last", help="csv label column (default: last)")
    p.add_argument("--header", action="store_true", help="csv file has a header row")
    p.add_argument("--seed", type=int, default=None, help=f"base seed (default: ${SEED_ENV} or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbp-elm", description="Extreme learning machines with block output-weight solvers.")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one model and report training accuracy")
    _add_data_args(t)
    t.add_argument("--nodes", type=_positive, required=True, help="hidden nodes L")
    t.add_argument("--strategy", default="rank", help="direct, df:<k>, rank[:tol] or rank-balanced[:tol]")
    t.add_argument("--json", action="store_true", help="print a JSON object instead of text")

    b = sub.add_parser("bench", help="time strategies over hidden-node counts")
    _add_data_args(b)
    b.add_argument("--nodes", type=_node_list, required=True, help="comma-separated hidden-node counts")
    b.add_argument("--strategies", default="df-sweep,rank",
                   help="comma- or semicolon-separated, e.g. df-sweep:150,750,rank")
    b.add_argument("--trials", type=_positive, default=bench.DEFAULT_TRIALS)
    b.add_argument("--machine", default=None, help="free-text machine descriptor")
    b.add_argument("--parallel", action="store_true", help="run cells concurrently (times flagged as contaminated)")
    b.add_argument("--no-warmup", action="store_true", help="skip the discarded warm-up trial")
    b.add_argument("--out", metavar="PATH", help="write the JSON report here")
    b.add_argument("--csv", metavar="PATH", help="write the CSV report here")
    b.add_argument("--plot-dir", metavar="DIR", help="write tab-separated plot series here")
    b.add_argument("--json", action="store_true", help="print the JSON report instead of the table")

    v = sub.add_parser("verify", help="randomized solver property checks")
    v.add_argument("--seed", type=int, default=None, help=f"base seed (default: ${SEED_ENV} or 0)")
    v.add_argument("--cases", type=_positive, default=200)
    v.add_argument("--json", action="store_true")
    return parser


def split_strategies(text: str) -> list[str]:
    """Split a strategy list on ';' or on commas that start a new strategy.

    ``df-sweep:150,750,rank`` gives ``["df-sweep:150,750", "rank"]``.
    """
    out: list[str] = []
    for chunk in text.split(";"):
        for piece in chunk.split(","):
            piece = piece.strip()
            if not piece:
                continue
            if out and re.fullmatch(r"\d+", piece) and out[-1].startswith("df-sweep:"):
                out[-1] += "," + piece
            else:
                out.append(piece)
    return out


def load_dataset(args) -> Dataset:
    if args.synth is not None:
        n, f, c = args.synth
        return synth(n, f, c)  # --seed drives the hidden weights, not the data
    fmt = args.format or ("libsvm" if args.data.endswith((".libsvm", ".svm", ".txt")) else "csv")
    if fmt == "libsvm":
        return normalize(load_libsvm(args.data))
    return normalize(load_csv(args.data, label_column=args.label_column, has_header=args.header))


def _check_train_args(args) -> None:
    try:
        args.strategy_obj = parse_strategy(args.strategy)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if isinstance(args.strategy_obj, DfSplit) and args.strategy_obj.split_index >= args.nodes:
        raise UsageError(f"split {args.strategy_obj.split_index} must be < --nodes {args.nodes}")


def _check_bench_args(args) -> None:
    try:
        args.strategy_objs = [parse_bench_strategy(s) for s in split_strategies(args.strategies)]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not args.strategy_objs:
        raise UsageError("no strategies given")
    for strat in args.strategy_objs:
        for L in args.nodes:
            splits = []
            if isinstance(strat, DfSplit):
                splits = [strat.split_index]
            elif isinstance(strat, DfSweep) and strat.splits is not None:
                splits = list(strat.splits)
            elif isinstance(strat, DfSweep) and L < 2:
                raise UsageError("df-sweep needs at least 2 hidden nodes")
            for s in splits:
                if not 0 < s < L:
                    raise UsageError(f"split {s} outside (0, {L}) for strategy {strat}")


def cmd_train(args) -> int:
    ds = load_dataset(args)
    params = ElmParams(ds.n_features, args.nodes, ds.n_classes, seed=args.seed)
    model, diag = train(params, ds.X, ds.Y, args.strategy_obj)
    acc = accuracy(predict(model, ds.X), ds.Y)
    if args.json:
        out = {"schema": bench.SCHEMA_VERSION, "dataset": ds.describe(), "hidden_nodes": args.nodes,
               "seed": args.seed, "accuracy": acc, **diag.as_dict()}
        print(json.dumps(out, indent=2))
        return 0
    d = ds.describe()
    print(f"dataset   {d['name']} N={d['N']} n={d['n']} m={d['m']}")
    print(f"strategy  {diag.strategy}  L={args.nodes}  seed={args.seed}")
    print(f"rank      {diag.rank if diag.rank is not None else '-'}")
    print(f"split     {diag.split[0]} + {diag.split[1]}")
    print(f"ridge     {'yes' if diag.ridge_applied else 'no'}")
    print(f"fallback  {'direct' if diag.fallback_to_direct else 'no'}{' (svd)' if diag.used_svd else ''}")
    print(f"hidden s  {diag.hidden_seconds:.4f}")
    print(f"solve s   {diag.solve_seconds:.4f}")
    print(f"accuracy  {acc:.4f}")
    return 0


def cmd_bench(args) -> int:
    ds = load_dataset(args)
    report = bench.sweep_nodes(
        ds, args.nodes, args.strategy_objs, trials=args.trials, base_seed=args.seed,
        machine=args.machine, parallel=args.parallel, warmup=not args.no_warmup,
    )
    if args.out:
        bench.emit_report(report, "json", args.out)
    if args.csv:
        bench.emit_report(report, "csv", args.csv)
    if args.plot_dir:
        bench.emit_plot_data(report, args.plot_dir)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(bench.format_summary(report))
    return 0


def cmd_verify(args) -> int:
    results = verify.run_all(args.seed, args.cases)
    if args.json:
        print(json.dumps({
            "schema": bench.SCHEMA_VERSION,
            "seed": args.seed,
            "cases": args.cases,
            "checks": [
                {"name": r.name, "passed": r.passed, "max_error": r.max_error,
                 "tolerance": r.tolerance, "failing_seed": r.failing_seed, "detail": r.detail}
                for r in results
            ],
        }, indent=2))
    else:
        for r in results:
            print(r.line())
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {"train": (cmd_train, _check_train_args), "bench": (cmd_bench, _check_bench_args), "verify": (cmd_verify, None)}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on bad syntax
    run, check = COMMANDS[args.command]
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if not 0 <= args.seed < 2**64:
            raise UsageError(f"seed must be a nonnegative 64-bit integer, got {args.seed}")
        if check is not None:
            check(args)
    except UsageError as exc:
        parser.error(str(exc))
    try:
        return run(args)
    except (DataFormatError, OSError, ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"rbp-elm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
