"""Command-line surface.

Subcommands: generate, prepare, train, evaluate, benchmark, report.
Exit codes: 0 success, 1 usage error, 2 data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import timedelta

from . import harness, lm, markov, s2l, vg
from .config import load_config, parse_ints, parse_tokens
from .errors import DataError, FitError, InputError, NumericError
from .sessions import Dataset, prepare, read_tsv, write_tsv
from .synthetic import (
    LengthDist,
    PRESETS,
    generate_dataset,
    generate_preset,
    spec_from_config,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="sessionbench",
        description="Benchmark toolkit for purchase-intent classification on "
        "symbolized clickstream sessions.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("generate", help="generate a synthetic labeled dataset")
    p.add_argument("--preset", choices=PRESETS, help="named generator preset")
    p.add_argument("--config", help="generator spec as a key = value config file")
    p.add_argument("--n-buy", type=int, default=1000)
    p.add_argument("--n-nobuy", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length-min", type=int, default=None)
    p.add_argument("--length-max", type=int, default=None)
    p.add_argument("--out", required=True, help="output TSV path")
    p.set_defaults(handler=_cmd_generate)

    p = sub.add_parser("prepare", help="prepare raw JSONL events into a TSV dataset")
    p.add_argument("--input", required=True, help="JSONL event file")
    p.add_argument("--out", required=True, help="output TSV path")
    p.add_argument("--gap-minutes", type=float, default=30.0)
    p.add_argument("--min-length", type=int, default=10)
    p.add_argument("--max-length", type=int, default=200)
    p.set_defaults(handler=_cmd_prepare)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--model", required=True, choices=harness.MODEL_KINDS)
    p.add_argument("--train", dest="train_path", required=True)
    p.add_argument("--val", dest="val_path", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--order", type=int, default=None, help="markov: fixed chain order")
    p.add_argument("--orders", default=None, help="markov: candidate orders to select from")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--priors", choices=("empirical", "uniform"), default="empirical")
    p.add_argument("--hidden", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch", type=int, default=20)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--val-metric", choices=("token", "session"), default="token")
    p.add_argument("--k", type=int, default=1, help="vg: k-gram size")
    p.add_argument("--codebook", default=None, help="vg: symbol order for ordinal codes")
    p.add_argument("--variance-target", type=float, default=0.95)
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--svm-epochs", type=int, default=2000)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a test TSV")
    p.add_argument("--model-file", required=True)
    p.add_argument("--test", dest="test_path", required=True)
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("benchmark", help="run the full benchmark protocol")
    p.add_argument("--config", required=True, help="benchmark config file")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=_cmd_benchmark)

    p = sub.add_parser("report", help="re-render a report from runs.json")
    p.add_argument("--runs", required=True, help="runs.json written by benchmark")
    p.add_argument("--out-md", default=None)
    p.add_argument("--out-csv", default=None)
    p.set_defaults(handler=_cmd_report)

    return parser


def _cmd_generate(args) -> int:
    length_dist = None
    if args.length_min is not None or args.length_max is not None:
        low = args.length_min if args.length_min is not None else 10
        high = args.length_max if args.length_max is not None else 60
        length_dist = LengthDist.uniform(low, high)
    if args.config:
        spec = spec_from_config(load_config(args.config))
        data = generate_dataset(spec)
    elif args.preset:
        data = generate_preset(args.preset, args.n_buy, args.n_nobuy, args.seed, length_dist)
    else:
        raise _UsageError("generate needs --preset or --config")
    write_tsv(data, args.out)
    print(f"wrote {len(data)} sessions ({data.n_buy} BUY / {data.n_nobuy} NOBUY) to {args.out}")
    return 0


def _cmd_prepare(args) -> int:
    with open(args.input, "r", encoding="utf-8") as fh:
        data = prepare(
            fh,
            gap=timedelta(minutes=args.gap_minutes),
            min_length=args.min_length,
            max_length=args.max_length,
        )
    write_tsv(data, args.out)
    print(
        f"prepared {len(data)} sessions ({data.n_buy} BUY / {data.n_nobuy} NOBUY), "
        f"dropped {data.meta['dropped_short']} short / {data.meta['dropped_long']} long"
    )
    return 0


def _load_split(path, name: str) -> Dataset:
    data = read_tsv(path)
    if len(data) == 0:
        raise DataError(f"{name} dataset {path} is empty")
    return data


def _cmd_train(args) -> int:
    train = _load_split(args.train_path, "train")
    val = _load_split(args.val_path, "val")
    kind = args.model
    if kind == "markov":
        if args.orders:
            orders = parse_ints(args.orders)
            order, curve = markov.select_order(train, val, orders, args.alpha, args.priors)
            print("order selection: " + ", ".join(f"k={k}: {a:.4f}" for k, a in curve))
        else:
            order = args.order if args.order is not None else markov.DEFAULT_ORDER
        model = markov.fit_mixture(train, order, args.alpha, args.priors)
        markov.save_mixture(model, args.out)
        val_acc = markov.accuracy(model, val)
        print(f"markov order={order} alpha={args.alpha} val_accuracy={val_acc:.4f}")
    elif kind == "lm":
        mixture, _ = lm.fit_lm_mixture(
            train,
            val,
            hidden=args.hidden,
            lr=args.lr,
            batch_size=args.batch,
            seed=args.seed,
            patience=args.patience,
            max_epochs=args.max_epochs,
            val_metric=args.val_metric,
            priors=args.priors,
        )
        lm.save_mixture(mixture, args.out)
        val_acc = lm.mixture_accuracy(mixture, val)
        print(f"lm hidden={args.hidden} lr={args.lr} batch={args.batch} val_accuracy={val_acc:.4f}")
    elif kind in ("s2l-avg", "s2l-last"):
        pooling = s2l.POOL_AVG if kind == "s2l-avg" else s2l.POOL_LAST
        model, curve = s2l.fit_s2l(
            train,
            val,
            pooling=pooling,
            hidden=args.hidden,
            lr=args.lr,
            batch_size=args.batch,
            seed=args.seed,
            patience=args.patience,
            max_epochs=args.max_epochs,
        )
        s2l.save_model(model, args.out)
        best = max(e["val_metric"] for e in curve)
        print(f"{kind} hidden={args.hidden} lr={args.lr} batch={args.batch} val_accuracy={best:.4f}")
    elif kind == "vg":
        codebook = tuple(parse_tokens(args.codebook)) if args.codebook else vg.DEFAULT_CODEBOOK
        pipeline = vg.fit_pipeline(
            train,
            k=args.k,
            codebook=codebook,
            variance_target=args.variance_target,
            C=args.svm_c,
            epochs=args.svm_epochs,
            seed=args.seed,
        )
        vg.save_pipeline(pipeline, args.out)
        val_acc = vg.pipeline_accuracy(pipeline, val)
        print(
            f"vg k={args.k} C={args.svm_c} retained_components={pipeline.pca.components.shape[1]} "
            f"val_accuracy={val_acc:.4f}"
        )
    print(f"saved checkpoint to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    model = harness.load_model_file(args.model_file)
    test = _load_split(args.test_path, "test")
    acc = harness.evaluate(model, test)
    print(f"accuracy={acc:.6f} n={len(test)}")
    return 0


def _cmd_benchmark(args) -> int:
    cfg = harness.load_benchmark_config(args.config)
    report = harness.benchmark(cfg)
    paths = harness.write_report(report, args.out_dir)
    sys.stdout.write(report.to_markdown())
    print(f"wrote {paths['csv']}, {paths['markdown']}, {paths['runs']}")
    failed = [row for row in report.rows if row.error is not None]
    if failed:
        for row in failed:
            print(f"model failed: {row.label}: {row.error}", file=sys.stderr)
        return 3
    return 0


def _cmd_report(args) -> int:
    with open(args.runs, "r", encoding="utf-8") as fh:
        runs_log = json.load(fh)
    report = harness.report_from_runs(runs_log)
    if args.out_md:
        with open(args.out_md, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_markdown())
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    if not args.out_md and not args.out_csv:
        sys.stdout.write(report.to_markdown())
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "handler", None) is None:
        parser.print_help()
        return 0
    try:
        return args.handler(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (FitError, NumericError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 3
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
