"""Batch command-line interface.

Subcommands: prepare (ingest -> core-filter -> split -> files), train,
evaluate, ablate, export-metrics. Flag values override config-file values,
which override defaults. Failures exit nonzero and print a one-line JSON
error record with a stable category to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import config as config_mod
from .checkpoint import load_checkpoint
from .errors import AttnrecError, DataError, ShapeError
from .evaluation import append_metrics_csv, evaluate
from .graph import ingest, load_split, save_split, split, ten_core_filter
from .training import run_ablation, train

EXIT_CODES = {
    "config": 2,
    "parse": 3,
    "empty-dataset": 4,
    "data": 5,
    "sampling": 6,
    "checkpoint": 7,
    "shape": 8,
    "non-finite": 9,
    "invariant": 10,
    "error": 1,
}


def _set_threads(threads: int | None):
    if threads is None:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=threads)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)


def _load_cfg(args) -> config_mod.TrainConfig:
    cfg = config_mod.TrainConfig()
    if getattr(args, "config", None):
        if not os.path.isfile(args.config):
            raise DataError(f"no such config file: {args.config}")
        cfg = config_mod.load_config(args.config, base=cfg)
    overrides = {}
    for flag, field in (("seed", "seed"), ("k", "k"), ("epochs", "max_epochs"),
                        ("batch_size", "batch_size"), ("lr", "learning_rate"),
                        ("fan_in", "fan_in"), ("dim", None)):
        value = getattr(args, flag, None)
        if value is None:
            continue
        if flag == "dim":
            overrides.update({"d0": value, "d1": value, "d2": value, "d3": value})
        else:
            overrides[field] = value
    ablation = getattr(args, "ablation", None)
    if ablation == "no-similarity":
        overrides["no_similarity"] = True
    elif ablation == "no-adaptive-margin":
        overrides["no_adaptive_margin"] = True
    return config_mod.from_dict(overrides, base=cfg)


def cmd_prepare(args) -> int:
    raw = ingest(args.data, args.format)
    raw_count = len(raw)
    filtered = ten_core_filter(raw, min_degree=args.min_degree)
    ds = split(filtered, train_frac=args.train_frac, valid_frac=args.valid_frac,
               seed=args.seed)
    stats = save_split(ds, args.out, extra_stats={"raw_interactions": raw_count,
                                                  "min_degree": args.min_degree})
    print(json.dumps(stats, sort_keys=True))
    return 0


def cmd_train(args) -> int:
    _set_threads(args.threads)
    cfg = _load_cfg(args)
    dataset = load_split(args.data)
    os.makedirs(args.out, exist_ok=True)
    cfg.to_json(os.path.join(args.out, "config.json"))
    report = train(dataset, cfg, out_dir=args.out)
    best_eval = max(report.evaluations, key=lambda e: e["recall"])
    append_metrics_csv(os.path.join(args.out, "metrics.csv"),
                       _report_to_metrics(best_eval), run_id=os.path.basename(args.out),
                       epoch=best_eval["epoch"])
    print(json.dumps({"best_epoch": report.best_epoch, "best_recall": report.best_recall,
                      "stop_reason": report.stop_reason,
                      "validation": best_eval}, sort_keys=True))
    return 0


def _report_to_metrics(record: dict):
    from .evaluation import MetricsReport

    return MetricsReport(recall_at_k=record["recall"], ndcg_at_k=record["ndcg"],
                         k=record["k"], num_users_evaluated=record["users"],
                         split=record["split"])


def cmd_evaluate(args) -> int:
    _set_threads(args.threads)
    dataset = load_split(args.data)
    params, slope, _ = load_checkpoint(args.checkpoint)
    if params.num_users != dataset.num_users or params.num_items != dataset.num_items:
        raise ShapeError(
            f"checkpoint is for {params.num_users} users x {params.num_items} items, "
            f"dataset has {dataset.num_users} x {dataset.num_items}")
    report = evaluate(params, dataset, split=args.split, k=args.k, slope=slope)
    print(json.dumps(report.as_dict(), sort_keys=True))
    if args.out:
        append_metrics_csv(args.out, report, run_id=os.path.basename(args.checkpoint))
    return 0


def cmd_ablate(args) -> int:
    _set_threads(args.threads)
    cfg = _load_cfg(args)
    dataset = load_split(args.data)
    os.makedirs(args.out, exist_ok=True)
    comparison = run_ablation(dataset, cfg, out_dir=args.out)
    print(f"{'variant':<22}{'recall':>10}{'ndcg':>10}{'recall%':>10}{'ndcg%':>10}   seed={comparison['seed']}")
    csv_path = os.path.join(args.out, "ablation.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("variant,recall,ndcg,recall_delta_pct,ndcg_delta_pct,seed\n")
        for row in comparison["rows"]:
            print(f"{row['variant']:<22}{row['recall']:>10.4f}{row['ndcg']:>10.4f}"
                  f"{row['recall_delta_pct']:>+9.2f}%{row['ndcg_delta_pct']:>+9.2f}%")
            fh.write(f"{row['variant']},{row['recall']:.6f},{row['ndcg']:.6f},"
                     f"{row['recall_delta_pct']:.2f},{row['ndcg_delta_pct']:.2f},"
                     f"{comparison['seed']}\n")
    return 0


def cmd_export_metrics(args) -> int:
    if not os.path.isfile(args.report):
        raise DataError(f"no such report file: {args.report}")
    rows = []
    with open(args.report, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("kind") == "eval":
                rows.append((record["epoch"], record["recall"], record["ndcg"]))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("epoch\trecall\tndcg\n")
        for epoch, recall, ndcg in rows:
            fh.write(f"{epoch}\t{recall:.6f}\t{ndcg:.6f}\n")
    print(f"wrote {len(rows)} evaluation points to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attnrec",
                                     description="Graph-attention recommender: batch experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest raw interactions, core-filter, split, write dataset")
    p.add_argument("--data", required=True, help="raw interaction file")
    p.add_argument("--format", choices=["tsv", "adjlist"], default="tsv")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--valid-frac", type=float, default=0.1)
    p.add_argument("--min-degree", type=int, default=10)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train on a prepared dataset")
    p.add_argument("--data", required=True, help="prepared dataset directory")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--fan-in", dest="fan_in", type=int)
    p.add_argument("--dim", type=int, help="set d0..d3 at once")
    p.add_argument("--k", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--ablation", choices=["none", "no-similarity", "no-adaptive-margin"],
                   default="none")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--split", choices=["validation", "test"], default="test")
    p.add_argument("--out", help="metrics CSV to append to")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train full / no-similarity / no-adaptive-margin variants")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--fan-in", dest="fan_in", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("export-metrics", help="report.jsonl -> epoch/metric TSV")
    p.add_argument("--report", required=True, help="report.jsonl from a training run")
    p.add_argument("--out", required=True, help="TSV output path")
    p.set_defaults(func=cmd_export_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AttnrecError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        print(json.dumps({"error": "data", "message": str(exc)}), file=sys.stderr)
        return EXIT_CODES["data"]


if __name__ == "__main__":
    sys.exit(main())
