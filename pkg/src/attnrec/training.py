"""Epoch orchestration: batch sampling, forward/backward, Adam steps,
periodic validation, early stopping on validation Recall@K, checkpointing,
and the three-variant ablation driver.

Everything is driven by one master seed: parameter init, the batch sampling
stream, and the optional warm-up cap resampling all derive from it, so a
(dataset, config) pair maps to exactly one trajectory.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import save_checkpoint
from .config import TrainConfig, validate
from .errors import ConfigError, EmptyDatasetError, NonFiniteError
from .evaluation import evaluate
from .losses import total_loss_and_gradients
from .model import Params, capped_adjacency, init_params
from .optim import AdamState, adam_step
from .sampling import build_minibatch
from .graph import SplitDataset

ABLATION_VARIANTS = ("full", "no_similarity", "no_adaptive_margin")


@dataclass
class TrainReport:
    config: dict
    epochs: list[dict] = field(default_factory=list)       # per-epoch mean losses
    evaluations: list[dict] = field(default_factory=list)  # validation metrics
    best_epoch: int = 0
    best_recall: float = 0.0
    best_checkpoint: str | None = None
    stop_reason: str = ""

    def as_dict(self) -> dict:
        return {"config": self.config, "epochs": self.epochs,
                "evaluations": self.evaluations, "best_epoch": self.best_epoch,
                "best_recall": self.best_recall, "best_checkpoint": self.best_checkpoint,
                "stop_reason": self.stop_reason}


class _Journal:
    """report.jsonl writer; a no-op when training runs without an out_dir."""

    def __init__(self, out_dir: str | None):
        self._fh = None
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            self._fh = open(os.path.join(out_dir, "report.jsonl"), "w", encoding="utf-8")

    def write(self, record: dict):
        if self._fh is not None:
            self._fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()


def train(dataset: SplitDataset, cfg: TrainConfig, out_dir: str | None = None,
          final_params: list | None = None) -> TrainReport:
    """Run the full training loop and return the report.

    Saves ckpt_{epoch}.bin at every evaluation plus best.bin whenever
    validation Recall@K improves (out_dir=None skips all file output).
    If `final_params` is a list, the trained Params are appended to it.
    """
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    graph = dataset.train
    if graph.num_interactions == 0:
        raise EmptyDatasetError("training graph has no interactions")

    params = init_params(cfg.dims, (graph.num_users, graph.num_items), cfg.seed)
    state = AdamState.for_params(params, alpha=cfg.learning_rate, beta1=cfg.beta1,
                                 beta2=cfg.beta2, eps=cfg.eps)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xBA7C4]))
    adj = graph.normalized_adjacency()

    report = TrainReport(config=cfg.to_dict())
    journal = _Journal(out_dir)
    journal.write({"kind": "meta", "seed": cfg.seed, "config": cfg.to_dict()})

    steps_per_epoch = max(1, math.ceil(graph.num_interactions / cfg.batch_size))
    best_recall = -1.0
    evals_without_improvement = 0
    stop_reason = "max_epochs"

    def run_eval(epoch: int) -> float:
        nonlocal best_recall, evals_without_improvement
        metrics = evaluate(params, dataset, split="validation", k=cfg.k,
                           slope=cfg.leaky_slope, adj=adj)
        record = {"kind": "eval", "epoch": epoch, **metrics.as_dict()}
        journal.write(record)
        report.evaluations.append({"epoch": epoch, **metrics.as_dict()})
        if metrics.recall_at_k > best_recall:
            best_recall = metrics.recall_at_k
            report.best_epoch = epoch
            report.best_recall = metrics.recall_at_k
            evals_without_improvement = 0
            if out_dir is not None:
                best_path = os.path.join(out_dir, "best.bin")
                save_checkpoint(best_path, params, cfg.leaky_slope, optimizer=state)
                report.best_checkpoint = best_path
        else:
            evals_without_improvement += 1
        if out_dir is not None:
            save_checkpoint(os.path.join(out_dir, f"ckpt_{epoch}.bin"), params,
                            cfg.leaky_slope, optimizer=state)
        return metrics.recall_at_k

    run_eval(0)
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            sums = {"bpr": 0.0, "similarity": 0.0, "l2": 0.0, "total": 0.0}
            for step in range(steps_per_epoch):
                batch = build_minibatch(graph, cfg.batch_size, cfg.fan_in,
                                        cfg.num_pos, cfg.num_neg, rng,
                                        retry_limit=cfg.retry_limit)
                step_adj = adj
                if cfg.warmup_fan_in is not None:
                    step_adj = capped_adjacency(graph, cfg.warmup_fan_in, rng)
                breakdown, grads = total_loss_and_gradients(params, step_adj, batch, cfg)
                if not np.isfinite(breakdown.total):
                    report.stop_reason = "non_finite_loss"
                    err = NonFiniteError(
                        f"loss became non-finite at epoch {epoch} step {step}")
                    err.report = report
                    raise err
                adam_step(params, grads, state, sparse=cfg.sparse_adam)
                for key, val in breakdown.as_dict().items():
                    sums[key] += val
                if cfg.log_every and (step + 1) % cfg.log_every == 0:
                    journal.write({"kind": "loss", "epoch": epoch, "step": step + 1,
                                   **breakdown.as_dict()})
            means = {k: v / steps_per_epoch for k, v in sums.items()}
            journal.write({"kind": "epoch", "epoch": epoch, **means})
            report.epochs.append({"epoch": epoch, **means})

            if epoch % cfg.eval_every == 0 or epoch == cfg.max_epochs:
                run_eval(epoch)
                if evals_without_improvement >= cfg.patience:
                    stop_reason = "early_stopping"
                    break
    finally:
        journal.close()

    report.stop_reason = report.stop_reason or stop_reason
    if final_params is not None:
        final_params.append(params)
    if out_dir is not None:
        with open(os.path.join(out_dir, "train_report.json"), "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


def run_ablation(dataset: SplitDataset, cfg: TrainConfig,
                 out_dir: str | None = None) -> dict:
    """Train the full model and both single-component removals under the same
    seed; returns per-variant reports plus a comparison table with percent
    deltas against the full model."""
    reports: dict[str, TrainReport] = {}
    for variant in ABLATION_VARIANTS:
        vcfg = cfg.replace(no_similarity=(variant == "no_similarity"),
                           no_adaptive_margin=(variant == "no_adaptive_margin"))
        vdir = os.path.join(out_dir, variant) if out_dir is not None else None
        reports[variant] = train(dataset, vcfg, out_dir=vdir)

    def best_metrics(rep: TrainReport) -> tuple[float, float]:
        best = max(rep.evaluations, key=lambda e: e["recall"])
        return best["recall"], best["ndcg"]

    full_recall, full_ndcg = best_metrics(reports["full"])
    rows = []
    for variant in ABLATION_VARIANTS:
        recall, ndcg = best_metrics(reports[variant])
        rows.append({
            "variant": variant,
            "recall": recall,
            "ndcg": ndcg,
            "recall_delta_pct": 0.0 if variant == "full" else
                (100.0 * (recall - full_recall) / full_recall if full_recall else float("nan")),
            "ndcg_delta_pct": 0.0 if variant == "full" else
                (100.0 * (ndcg - full_ndcg) / full_ndcg if full_ndcg else float("nan")),
        })
    comparison = {"seed": cfg.seed, "rows": rows,
                  "reports": {k: v.as_dict() for k, v in reports.items()}}
    if out_dir is not None:
        with open(os.path.join(out_dir, "ablation.json"), "w", encoding="utf-8") as fh:
            json.dump(comparison, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return comparison
