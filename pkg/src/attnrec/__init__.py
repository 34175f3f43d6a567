"""Attention-based embedding propagation recommender over bipartite
interaction graphs, trained with an adaptive-margin ranking loss plus a
2-order similarity loss on context embeddings."""

from .config import TrainConfig, load_config
from .evaluation import MetricsReport, evaluate, ndcg_at_k, rank_items, recall_at_k
from .graph import (InteractionGraph, RawInteractions, SplitDataset, density,
                    ingest, load_split, save_split, split, ten_core_filter)
from .losses import (LossBreakdown, bpr_adaptive_margin, l2_penalty,
                     similarity_loss, total_loss, total_loss_and_gradients)
from .model import (ForwardTrace, GradientSet, Params, attention_aggregate,
                    attention_normalize, attention_score, compute_all_embeddings,
                    init_params, predict, warmup_forward, warmup_weight)
from .optim import AdamState, adam_step
from .sampling import (MiniBatch, NeighborSample, SimilarityPairSet, TrainTriple,
                       build_minibatch, sample_neighbors, sample_similarity_pairs,
                       sample_triples)
from .training import TrainReport, run_ablation, train

__version__ = "0.1.0"

__all__ = [
    "TrainConfig", "load_config",
    "MetricsReport", "evaluate", "ndcg_at_k", "rank_items", "recall_at_k",
    "InteractionGraph", "RawInteractions", "SplitDataset", "density",
    "ingest", "load_split", "save_split", "split", "ten_core_filter",
    "LossBreakdown", "bpr_adaptive_margin", "l2_penalty", "similarity_loss",
    "total_loss", "total_loss_and_gradients",
    "ForwardTrace", "GradientSet", "Params", "attention_aggregate",
    "attention_normalize", "attention_score", "compute_all_embeddings",
    "init_params", "predict", "warmup_forward", "warmup_weight",
    "AdamState", "adam_step",
    "MiniBatch", "NeighborSample", "SimilarityPairSet", "TrainTriple",
    "build_minibatch", "sample_neighbors", "sample_similarity_pairs", "sample_triples",
    "TrainReport", "run_ablation", "train",
    "__version__",
]
