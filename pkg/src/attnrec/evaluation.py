"""Full-ranking top-K evaluation: every item is scored per user with the
deterministic full-neighborhood forward, training positives are removed, and
Recall@K / NDCG@K are averaged over users with held-out items."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .graph import InteractionGraph, SplitDataset
from .model import Params, compute_all_embeddings


@dataclass
class MetricsReport:
    recall_at_k: float
    ndcg_at_k: float
    k: int
    num_users_evaluated: int
    split: str = "test"

    def as_dict(self) -> dict:
        return {"split": self.split, "k": self.k, "recall": self.recall_at_k,
                "ndcg": self.ndcg_at_k, "users": self.num_users_evaluated}


def rank_items(scores: np.ndarray, exclude: np.ndarray) -> np.ndarray:
    """Item indices in descending score order, ties broken by ascending index,
    with the excluded (training) items removed."""
    scores = np.asarray(scores, dtype=float)
    masked = scores.copy()
    if len(exclude):
        masked[np.asarray(exclude, dtype=np.int64)] = -np.inf
    # stable sort on the negated scores keeps ascending index within ties
    order = np.argsort(-masked, kind="stable")
    return order[: len(scores) - len(exclude)] if len(exclude) else order


def recall_at_k(ranked: np.ndarray, test_items, k: int) -> float:
    test_items = set(int(x) for x in test_items)
    if not test_items:
        raise ValueError("recall undefined for an empty test set")
    hits = sum(1 for item in ranked[:k] if int(item) in test_items)
    return hits / len(test_items)


def ndcg_at_k(ranked: np.ndarray, test_items, k: int) -> float:
    """Binary-relevance DCG with log2 position discount, normalized by the
    ideal DCG of min(|test_items|, k) top-ranked hits."""
    test_items = set(int(x) for x in test_items)
    if not test_items:
        raise ValueError("ndcg undefined for an empty test set")
    dcg = sum(1.0 / np.log2(pos + 2) for pos, item in enumerate(ranked[:k])
              if int(item) in test_items)
    ideal = sum(1.0 / np.log2(pos + 2) for pos in range(min(len(test_items), k)))
    return dcg / ideal


def evaluate(params: Params, dataset: SplitDataset, split: str = "test", k: int = 20,
             slope: float = 0.2, adj=None, user_chunk: int = 1024) -> MetricsReport:
    """Average per-user metrics over every user with at least one held-out
    item. Scores come from one full-neighborhood forward; candidate items
    exclude only the user's training positives."""
    graph = dataset.train
    if adj is None:
        adj = graph.normalized_adjacency()
    user_star, item_star = compute_all_embeddings(params, graph, adj, slope)

    held = dataset.held_out_by_user(split)
    users = np.array(sorted(held), dtype=np.int64)
    recalls = np.zeros(len(users))
    ndcgs = np.zeros(len(users))
    for lo in range(0, len(users), user_chunk):
        chunk = users[lo : lo + user_chunk]
        scores = user_star[chunk] @ item_star.T
        for row, u in enumerate(chunk):
            ranked = rank_items(scores[row], graph.user_adj(u))
            test_items = held[int(u)]
            recalls[lo + row] = recall_at_k(ranked, test_items, k)
            ndcgs[lo + row] = ndcg_at_k(ranked, test_items, k)
    n_eval = len(users)
    return MetricsReport(recall_at_k=float(recalls.mean()) if n_eval else 0.0,
                         ndcg_at_k=float(ndcgs.mean()) if n_eval else 0.0,
                         k=k, num_users_evaluated=n_eval, split=split)


def training_recall(params: Params, graph: InteractionGraph, k: int = 20,
                    slope: float = 0.2, adj=None) -> float:
    """Recall@K of the training positives themselves with nothing excluded;
    an overfitting diagnostic, not an evaluation metric."""
    if adj is None:
        adj = graph.normalized_adjacency()
    user_star, item_star = compute_all_embeddings(params, graph, adj, slope)
    scores = user_star @ item_star.T
    recalls = []
    for u in range(graph.num_users):
        positives = graph.user_adj(u)
        if len(positives) == 0:
            continue
        ranked = rank_items(scores[u], np.empty(0, np.int64))
        recalls.append(recall_at_k(ranked, positives, k))
    return float(np.mean(recalls)) if recalls else 0.0


def append_metrics_csv(path: str, report: MetricsReport, run_id: str = "",
                       epoch: int | None = None) -> None:
    """Run-over-run comparison log; one row per evaluation."""
    new = not os.path.isfile(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(["run_id", "epoch", "split", "k", "recall", "ndcg", "users"])
        writer.writerow([run_id, "" if epoch is None else epoch, report.split,
                         report.k, f"{report.recall_at_k:.6f}", f"{report.ndcg_at_k:.6f}",
                         report.num_users_evaluated])
