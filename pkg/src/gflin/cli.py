"""Command-line pipeline: train, sweep, diagnose, time, synth.

Every command is deterministic given its flags and seeds, except for the
wall-clock fields in the emitted records. Exit codes: 0 success, 1 usage
error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import logreg
from .data import LabeledDataset, Split, load_dataset, make_split, synth_sbm, write_dataset
from .diagnostics import build_limit_report, report_to_json
from .errors import ConfigError, DataError, GflinError, NumericalError
from .filters import (
    DEFAULT_TAU,
    DEFAULT_TERMINAL_TIME,
    DGC,
    FILTER_KINDS,
    SSGC,
    FilterConfig,
    FilterMatrix,
    compute_filter,
)
from .graph import normalize
from .solver import DEFAULT_LAMBDA_GRID, fit, predict, save_model, select_lambda

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

MODE_GRADIENT_FREE = "gf"
MODE_GRADIENT_DESCENT = "gd"

_NORM_BY_FLAG = {"sym": "symmetric", "row": "row"}

SWEEP_HEADER = ["kind", "K", "seed", "mode", "accuracy", "fit_wall_time_s", "filter_wall_time_s"]
TIME_HEADER = ["K", "filter_wall_time_s", "closed_form_fit_s", "gd_train_s"]
GRADIENT_STATS_HEADER = ["K", "median_abs", "p05", "p95", "max_abs"]
TRACE_HEADER = ["K", "epoch", "loss"]


@dataclass
class RunRecord:
    """One training run: configuration plus its measured metrics."""

    command: str
    dataset: str
    filter: dict
    training: dict
    split_seed: int
    metrics: dict
    timestamp: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; route through ConfigError
    # instead so usage problems land on exit code 1.
    def error(self, message):
        raise ConfigError(message)


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None
    if not values:
        raise ConfigError(f"{flag} must name at least one value")
    return values


def _parse_ratios(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"--ratios expects comma-separated numbers, got {text!r}") from None
    if len(parts) != 3:
        raise ConfigError(f"--ratios expects exactly three numbers, got {text!r}")
    return parts


def _parse_lambda_grid(text: str) -> tuple[float, ...]:
    if text == "default":
        return DEFAULT_LAMBDA_GRID
    try:
        grid = tuple(float(p) for p in text.split(",") if p != "")
    except ValueError:
        raise ConfigError(f"--lambda-grid expects comma-separated numbers, got {text!r}") from None
    if not grid:
        raise ConfigError("--lambda-grid must name at least one value")
    return grid


def _filter_config(kind: str, depth: int, tau, terminal_time, norm_flag: str) -> FilterConfig:
    if kind not in FILTER_KINDS:
        raise ConfigError(f"--filter must be one of {'|'.join(FILTER_KINDS)}, got {kind!r}")
    if tau is not None and kind != SSGC:
        raise ConfigError(f"--tau is only valid with --filter ssgc, not {kind}")
    if terminal_time is not None and kind != DGC:
        raise ConfigError(f"--terminal-time is only valid with --filter dgc, not {kind}")
    if kind == SSGC and tau is None:
        tau = DEFAULT_TAU
    if kind == DGC and terminal_time is None:
        terminal_time = DEFAULT_TERMINAL_TIME
    return FilterConfig(kind, depth, tau=tau, terminal_time=terminal_time, normalization=_NORM_BY_FLAG[norm_flag])


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--edges", required=True, help="edge-list file (src<TAB>dst per line)")
    parser.add_argument("--features", required=True, help="feature file ('N F' header, then rows)")
    parser.add_argument("--labels", required=True, help="label file (node_id<TAB>class_id per line)")


def _add_split_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--split-seed", type=int, default=0, help="seed for the split permutation")
    parser.add_argument("--ratios", default="0.1,0.1,0.8", help="train,val,test proportions")


def _add_filter_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--filter", default="sgc", help="filter kind(s): sgc|ssgc|dgc")
    parser.add_argument("--k", default="2", help="propagation depth(s), comma separated")
    parser.add_argument("--tau", type=float, default=None, help="ssgc mixing weight (default 0.05)")
    parser.add_argument(
        "--terminal-time", type=float, default=None, help="dgc diffusion horizon (default 5.27)"
    )
    parser.add_argument("--norm", choices=sorted(_NORM_BY_FLAG), default="sym", help="normalization")


def _accuracy(pred, true) -> float:
    true = list(true)
    if not true:
        return 0.0
    return float(np.mean([p == t for p, t in zip(pred, true)]))


def _load(args) -> LabeledDataset:
    return load_dataset(args.edges, args.features, args.labels)


def _timed_filter(dataset: LabeledDataset, config: FilterConfig) -> tuple[FilterMatrix, float]:
    adj = normalize(dataset.graph, config.normalization)
    start = time.perf_counter()
    fm = compute_filter(adj, dataset.graph.features, config)
    return fm, time.perf_counter() - start


def _fit_gradient_free(fm: FilterMatrix, dataset: LabeledDataset, split: Split, args):
    """Fit the closed form, selecting lam on the validation set if a grid is in play.

    Returns (model, training-record dict, fit seconds).
    """
    train_rows = fm.values[split.train]
    train_labels = dataset.labels[split.train].tolist()
    if args.lam is not None and args.lambda_grid is not None:
        raise ConfigError("pass either --lambda or --lambda-grid, not both")
    if args.lam is not None:
        if args.lam <= 0:
            raise ConfigError(f"--lambda must be positive, got {args.lam}")
        start = time.perf_counter()
        model = fit(train_rows, train_labels, args.lam)
        fit_seconds = time.perf_counter() - start
        return model, {"lambda": args.lam, "lambda_grid": None, "val_accuracy": None}, fit_seconds

    grid = _parse_lambda_grid(args.lambda_grid) if args.lambda_grid is not None else DEFAULT_LAMBDA_GRID
    val_rows = fm.values[split.val]
    val_labels = dataset.labels[split.val].tolist()
    best_lam, val_acc, _ = select_lambda(train_rows, train_labels, val_rows, val_labels, grid)
    start = time.perf_counter()
    model = fit(train_rows, train_labels, best_lam)
    fit_seconds = time.perf_counter() - start
    return model, {"lambda": best_lam, "lambda_grid": list(grid), "val_accuracy": val_acc}, fit_seconds


def _config_as_dict(config: FilterConfig) -> dict:
    return {
        "kind": config.kind,
        "depth": int(config.depth),
        "tau": config.tau,
        "terminal_time": config.terminal_time,
        "normalization": config.normalization,
    }


def _write_text(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(out).write_text(text)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_train(args) -> int:
    dataset = _load(args)
    depths = _parse_int_list(args.k, "--k")
    if len(depths) != 1:
        raise ConfigError(f"train expects a single --k value, got {args.k!r}")
    config = _filter_config(args.filter, depths[0], args.tau, args.terminal_time, args.norm)
    split = make_split(dataset, _parse_ratios(args.ratios), args.split_seed)

    fm, filter_seconds = _timed_filter(dataset, config)
    model, training, fit_seconds = _fit_gradient_free(fm, dataset, split, args)

    _, pred = predict(model, fm.values[split.test])
    accuracy = _accuracy(pred, dataset.labels[split.test].tolist())

    record = RunRecord(
        command="train",
        dataset=dataset.name,
        filter=_config_as_dict(config),
        training=training,
        split_seed=split.seed,
        metrics={
            "accuracy": accuracy,
            "fit_wall_time_s": fit_seconds,
            "filter_wall_time_s": filter_seconds,
        },
        timestamp=datetime.now(timezone.utc).isoformat(),
    )
    if args.out:
        save_model(model, args.out, dataset.labels[split.train].tolist(), config)
    print(record.to_json())
    return EXIT_OK


def _sweep_cell(fm: FilterMatrix, dataset: LabeledDataset, split: Split, args, kind, depth, seed, mode):
    train_labels = dataset.labels[split.train].tolist()
    test_labels = dataset.labels[split.test].tolist()
    if mode == MODE_GRADIENT_FREE:
        model, _, fit_seconds = _fit_gradient_free(fm, dataset, split, args)
        _, pred = predict(model, fm.values[split.test])
    else:
        optimizer = logreg.OptimizerConfig(
            learning_rate=args.lr, epochs=args.epochs, weight_decay=args.weight_decay, seed=seed
        )
        start = time.perf_counter()
        model = logreg.train(fm.values[split.train], train_labels, optimizer)
        fit_seconds = time.perf_counter() - start
        pred = logreg.predict_labels(model, fm.values[split.test])
    return _accuracy(pred, test_labels), fit_seconds


def cmd_sweep(args) -> int:
    dataset = _load(args)
    split = make_split(dataset, _parse_ratios(args.ratios), args.split_seed)
    kinds = [k for k in args.filter.split(",") if k]
    depths = _parse_int_list(args.k, "--k")
    seeds = _parse_int_list(args.seeds, "--seeds")
    modes = [m for m in args.mode.split(",") if m]
    for mode in modes:
        if mode not in (MODE_GRADIENT_FREE, MODE_GRADIENT_DESCENT):
            raise ConfigError(f"--mode entries must be gf or gd, got {mode!r}")

    filters_by_cell: dict[tuple[str, int], tuple[FilterMatrix, float]] = {}
    for kind in kinds:
        for depth in depths:
            config = _filter_config(kind, depth, args.tau, args.terminal_time, args.norm)
            filters_by_cell[(kind, depth)] = _timed_filter(dataset, config)

    cells = [(k, d, s, m) for k in kinds for d in depths for s in seeds for m in modes]

    def run(cell):
        kind, depth, seed, mode = cell
        fm, filter_seconds = filters_by_cell[(kind, depth)]
        accuracy, fit_seconds = _sweep_cell(fm, dataset, split, args, kind, depth, seed, mode)
        return [kind, depth, seed, mode, f"{accuracy:.4f}", repr(fit_seconds), repr(filter_seconds)]

    workers = max(1, int(os.environ.get("GFLIN_THREADS", "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(cell) for cell in cells]

    rows.sort(key=lambda r: (r[0], int(r[1]), int(r[2]), r[3]))
    _write_text(_csv_text(SWEEP_HEADER, rows), args.out)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    dataset = _load(args)
    depths = _parse_int_list(args.k, "--k")
    if sorted(set(depths)) != depths:
        raise ConfigError(f"--k values must be strictly increasing, got {args.k!r}")
    kind = args.filter
    if kind not in FILTER_KINDS:
        raise ConfigError(f"--filter must be one of {'|'.join(FILTER_KINDS)}, got {kind!r}")
    tau = args.tau if args.tau is not None else (DEFAULT_TAU if kind == SSGC else None)
    terminal_time = (
        args.terminal_time
        if args.terminal_time is not None
        else (DEFAULT_TERMINAL_TIME if kind == DGC else None)
    )
    if tau is not None and kind != SSGC:
        raise ConfigError(f"--tau is only valid with --filter ssgc, not {kind}")
    if terminal_time is not None and kind != DGC:
        raise ConfigError(f"--terminal-time is only valid with --filter dgc, not {kind}")

    # The analytic limits are stated for the raw row-normalized adjacency,
    # so the report always uses the row operator; --norm only affects the
    # gradient-descent arm below.
    report = build_limit_report(
        dataset.graph,
        dataset.graph.features,
        kind,
        depths,
        tau=tau,
        terminal_time=terminal_time,
        self_loops=args.with_self_loops,
    )
    _write_text(report_to_json(report), args.out)

    if args.gradients_out or args.traces_out:
        split = make_split(dataset, _parse_ratios(args.ratios), args.split_seed)
        stats_rows = []
        trace_rows = []
        for depth in depths:
            config = _filter_config(kind, depth, tau, terminal_time, args.norm)
            fm, _ = _timed_filter(dataset, config)
            model = logreg.train(
                fm.values[split.train],
                dataset.labels[split.train].tolist(),
                logreg.OptimizerConfig(
                    learning_rate=args.lr, epochs=args.epochs, weight_decay=args.weight_decay, seed=args.split_seed
                ),
            )
            stats = logreg.gradient_stats(model)
            stats_rows.append(
                [depth, repr(stats["median_abs"]), repr(stats["p05"]), repr(stats["p95"]), repr(stats["max_abs"])]
            )
            trace_rows.extend([depth, epoch, repr(loss)] for epoch, loss in model.training_trace)
        if args.gradients_out:
            Path(args.gradients_out).write_text(_csv_text(GRADIENT_STATS_HEADER, stats_rows))
        if args.traces_out:
            Path(args.traces_out).write_text(_csv_text(TRACE_HEADER, trace_rows))
    return EXIT_OK


def cmd_time(args) -> int:
    dataset = _load(args)
    split = make_split(dataset, _parse_ratios(args.ratios), args.split_seed)
    depths = _parse_int_list(args.k, "--k")
    lam = args.lam if args.lam is not None else 1.0
    if lam <= 0:
        raise ConfigError(f"--lambda must be positive, got {lam}")
    train_labels = dataset.labels[split.train].tolist()

    rows = []
    for depth in depths:
        config = _filter_config(args.filter, depth, args.tau, args.terminal_time, args.norm)
        fm, filter_seconds = _timed_filter(dataset, config)
        train_rows = fm.values[split.train]

        start = time.perf_counter()
        fit(train_rows, train_labels, lam)
        closed_form_seconds = time.perf_counter() - start

        optimizer = logreg.OptimizerConfig(
            learning_rate=args.lr, epochs=args.epochs, weight_decay=args.weight_decay, seed=args.split_seed
        )
        start = time.perf_counter()
        logreg.train(train_rows, train_labels, optimizer)
        gd_seconds = time.perf_counter() - start

        rows.append([depth, repr(filter_seconds), repr(closed_form_seconds), repr(gd_seconds)])

    _write_text(_csv_text(TIME_HEADER, rows), args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    dataset = synth_sbm(
        args.block_size, args.blocks, args.p_in, args.p_out, args.feature_dim, args.seed
    )
    write_dataset(dataset, args.edges, args.features, args.labels)
    print(
        json.dumps(
            {
                "name": dataset.name,
                "num_nodes": dataset.graph.num_nodes,
                "num_edges": len(dataset.graph.edge_pairs()),
                "num_classes": dataset.num_classes,
            }
        )
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gflin", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="closed-form fit plus test accuracy", parents=[])
    _add_dataset_flags(train)
    _add_filter_flags(train)
    _add_split_flags(train)
    train.add_argument("--lambda", dest="lam", type=float, default=None, help="ridge strength (1/xi)")
    train.add_argument("--lambda-grid", default=None, help="'default' or comma-separated values")
    train.add_argument("--out", default=None, help="path for the trained model file")
    train.set_defaults(func=cmd_train)

    sweep = sub.add_parser("sweep", help="accuracy grid over kind x depth x seed x mode")
    _add_dataset_flags(sweep)
    _add_filter_flags(sweep)
    _add_split_flags(sweep)
    sweep.add_argument("--lambda", dest="lam", type=float, default=None)
    sweep.add_argument("--lambda-grid", default=None)
    sweep.add_argument("--seeds", default="0", help="comma-separated training seeds")
    sweep.add_argument("--mode", default=MODE_GRADIENT_FREE, help="gf, gd, or gf,gd")
    sweep.add_argument("--epochs", type=int, default=200)
    sweep.add_argument("--lr", type=float, default=0.01)
    sweep.add_argument("--weight-decay", type=float, default=0.0)
    sweep.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    sweep.set_defaults(func=cmd_sweep)

    diagnose = sub.add_parser("diagnose", help="depth-limit report and gradient statistics")
    _add_dataset_flags(diagnose)
    _add_filter_flags(diagnose)
    _add_split_flags(diagnose)
    diagnose.add_argument(
        "--with-self-loops",
        action="store_true",
        help="keep self-loops in the row operator (the exact limits use the raw adjacency)",
    )
    diagnose.add_argument("--epochs", type=int, default=200)
    diagnose.add_argument("--lr", type=float, default=0.01)
    diagnose.add_argument("--weight-decay", type=float, default=0.0)
    diagnose.add_argument("--out", default=None, help="report JSON path (stdout when omitted)")
    diagnose.add_argument("--gradients-out", default=None, help="per-depth gradient stats CSV")
    diagnose.add_argument("--traces-out", default=None, help="per-depth loss trace CSV")
    diagnose.set_defaults(func=cmd_diagnose)

    timer = sub.add_parser("time", help="closed-form versus gradient-descent wall time")
    _add_dataset_flags(timer)
    _add_filter_flags(timer)
    _add_split_flags(timer)
    timer.add_argument("--lambda", dest="lam", type=float, default=None)
    timer.add_argument("--epochs", type=int, default=200)
    timer.add_argument("--lr", type=float, default=0.01)
    timer.add_argument("--weight-decay", type=float, default=0.0)
    timer.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    timer.set_defaults(func=cmd_time)

    synth = sub.add_parser("synth", help="write a block-model dataset to the three text files")
    _add_dataset_flags(synth)
    synth.add_argument("--blocks", type=int, default=2)
    synth.add_argument("--block-size", type=int, default=50)
    synth.add_argument("--p-in", type=float, default=0.5)
    synth.add_argument("--p-out", type=float, default=0.05)
    synth.add_argument("--feature-dim", type=int, default=16)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"gflin: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"gflin: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"gflin: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
