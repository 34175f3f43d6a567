"""Training objective: adaptive-margin pairwise ranking loss, the 2-order
similarity loss over context tables, L2, and their exact gradients.

Sign conventions: the ranking term is softplus(-(y_ui - y_uj - margin)), i.e.
-log sigmoid of the margin-adjusted score gap, and the similarity negatives
use -log sigmoid(-x). Both are the bounded-below forms; minimizing them pulls
positives up and negatives down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .config import TrainConfig
from .model import GradientSet, Params, backward_centers, forward_batch
from .sampling import MiniBatch, SimilarityPairSet


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)) without overflow."""
    x = np.asarray(x, dtype=float)
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LossBreakdown:
    bpr: float
    similarity: float
    l2: float
    total: float
    lambda1: float
    lambda2: float

    def as_dict(self) -> dict:
        return {"bpr": self.bpr, "similarity": self.similarity, "l2": self.l2,
                "total": self.total}


def bpr_adaptive_margin(y_ui, y_uj, y_ij, detach_margin: bool = True,
                        no_adaptive_margin: bool = False) -> float:
    """Mean softplus(-(y_ui - y_uj - max(0, y_ij))) over the batch.

    `detach_margin` only matters for gradients (see bpr_gradients); the value
    is the same either way. `no_adaptive_margin` zeroes the margin entirely.
    """
    y_ui, y_uj, y_ij = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (y_ui, y_uj, y_ij))
    margin = np.zeros_like(y_ij) if no_adaptive_margin else np.maximum(0.0, y_ij)
    return float(np.mean(softplus(-(y_ui - y_uj - margin))))


def bpr_gradients(y_ui, y_uj, y_ij, detach_margin: bool = True,
                  no_adaptive_margin: bool = False):
    """d loss / d (y_ui, y_uj, y_ij) including the 1/B mean factor."""
    y_ui, y_uj, y_ij = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (y_ui, y_uj, y_ij))
    margin = np.zeros_like(y_ij) if no_adaptive_margin else np.maximum(0.0, y_ij)
    delta = y_ui - y_uj - margin
    g_delta = -sigmoid(-delta) / len(delta)
    g_ij = np.zeros_like(g_delta)
    if not no_adaptive_margin and not detach_margin:
        g_ij = -g_delta * (y_ij > 0)
    return g_delta, -g_delta, g_ij


def _pair_arrays(pair_sets: list[SimilarityPairSet], which: str):
    anchors, others = [], []
    for ps in pair_sets:
        vals = ps.positives if which == "pos" else ps.negatives
        anchors.append(np.full(len(vals), ps.anchor, dtype=np.int64))
        others.append(vals)
    if not anchors:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(anchors), np.concatenate(others)


def similarity_loss(E: np.ndarray, E_UC: np.ndarray, E_IC: np.ndarray,
                    user_pairs: list[SimilarityPairSet],
                    item_pairs: list[SimilarityPairSet],
                    num_users: int | None = None) -> float:
    """Sum over anchors of -log sig(<e0, ctx_pos>) - log sig(-<e0, ctx_neg>),
    user side against E_UC and item side against E_IC. Anchors read the base
    table only, so this loss never reaches the propagation layers."""
    if num_users is None:
        num_users = E_UC.shape[0]
    total = 0.0
    for pairs, ctx, off in ((user_pairs, E_UC, 0), (item_pairs, E_IC, num_users)):
        a_pos, pos = _pair_arrays(pairs, "pos")
        a_neg, neg = _pair_arrays(pairs, "neg")
        if len(pos):
            x = np.einsum("rd,rd->r", E[a_pos + off], ctx[pos])
            total += float(softplus(-x).sum())
        if len(neg):
            x = np.einsum("rd,rd->r", E[a_neg + off], ctx[neg])
            total += float(softplus(x).sum())
    return total


def similarity_gradients(params: Params, user_pairs, item_pairs,
                         grads: GradientSet, scale: float) -> None:
    """Accumulate scale * d similarity_loss into dE, dE_UC, dE_IC."""
    E = params.E
    n = params.num_users
    for pairs, ctx, d_ctx, off in ((user_pairs, params.E_UC, grads.E_UC, 0),
                                   (item_pairs, params.E_IC, grads.E_IC, n)):
        a_pos, pos = _pair_arrays(pairs, "pos")
        a_neg, neg = _pair_arrays(pairs, "neg")
        if len(pos):
            anchor_rows = a_pos + off
            x = np.einsum("rd,rd->r", E[anchor_rows], ctx[pos])
            g = scale * (sigmoid(x) - 1.0)
            np.add.at(grads.E, anchor_rows, g[:, None] * ctx[pos])
            np.add.at(d_ctx, pos, g[:, None] * E[anchor_rows])
        if len(neg):
            anchor_rows = a_neg + off
            x = np.einsum("rd,rd->r", E[anchor_rows], ctx[neg])
            g = scale * sigmoid(x)
            np.add.at(grads.E, anchor_rows, g[:, None] * ctx[neg])
            np.add.at(d_ctx, neg, g[:, None] * E[anchor_rows])


def l2_penalty(params: Params) -> float:
    """Sum of squared entries over every trainable table."""
    return float(sum(np.sum(t * t) for t in params.tables().values()))


def total_loss(params: Params, adj: sp.csr_matrix, batch: MiniBatch,
               cfg: TrainConfig) -> LossBreakdown:
    """Loss value only; shares the forward implementation with the gradient
    path so finite differences of this function check that path's derivative."""
    _, y_ui, y_uj, y_ij = forward_batch(params, adj, batch, cfg.leaky_slope)
    bpr = bpr_adaptive_margin(y_ui, y_uj, y_ij, no_adaptive_margin=cfg.no_adaptive_margin)
    sim = 0.0
    if not cfg.no_similarity:
        sim = similarity_loss(params.E, params.E_UC, params.E_IC,
                              batch.user_sim, batch.item_sim, params.num_users)
    l2 = l2_penalty(params)
    return LossBreakdown(bpr=bpr, similarity=sim, l2=l2,
                         total=bpr + cfg.lambda1 * sim + cfg.lambda2 * l2,
                         lambda1=cfg.lambda1, lambda2=cfg.lambda2)


def total_loss_and_gradients(params: Params, adj: sp.csr_matrix, batch: MiniBatch,
                             cfg: TrainConfig) -> tuple[LossBreakdown, GradientSet]:
    """One full training step's loss and exact gradients for all of the
    trainable tables."""
    trace, y_ui, y_uj, y_ij = forward_batch(params, adj, batch, cfg.leaky_slope)
    grads = GradientSet.zeros_like(params)
    n = params.num_users

    bpr = bpr_adaptive_margin(y_ui, y_uj, y_ij, no_adaptive_margin=cfg.no_adaptive_margin)
    g_ui, g_uj, g_ij = bpr_gradients(y_ui, y_uj, y_ij, detach_margin=cfg.detach_margin,
                                     no_adaptive_margin=cfg.no_adaptive_margin)

    # prediction is <e0_a, e0_b> + <e2_a, e2_b>: the base part hits E directly,
    # the propagated part flows back through the trace
    u_rows, i_rows, j_rows = batch.u, batch.i + n, batch.j + n
    d_e2 = np.zeros_like(trace.e2)
    for g, (rows_a, rows_b), (slot_a, slot_b) in (
        (g_ui, (u_rows, i_rows), (batch.slot_u, batch.slot_i)),
        (g_uj, (u_rows, j_rows), (batch.slot_u, batch.slot_j)),
        (g_ij, (i_rows, j_rows), (batch.slot_i, batch.slot_j)),
    ):
        if not np.any(g):
            continue
        np.add.at(grads.E, rows_a, g[:, None] * params.E[rows_b])
        np.add.at(grads.E, rows_b, g[:, None] * params.E[rows_a])
        np.add.at(d_e2, slot_a, g[:, None] * trace.e2[slot_b])
        np.add.at(d_e2, slot_b, g[:, None] * trace.e2[slot_a])
    backward_centers(params, trace, d_e2, grads)

    sim = 0.0
    if not cfg.no_similarity:
        sim = similarity_loss(params.E, params.E_UC, params.E_IC,
                              batch.user_sim, batch.item_sim, n)
        similarity_gradients(params, batch.user_sim, batch.item_sim, grads, cfg.lambda1)

    l2 = l2_penalty(params)
    if cfg.lambda2 > 0:
        two_l2 = 2.0 * cfg.lambda2
        for name, table in params.tables().items():
            g = getattr(grads, name)
            if cfg.lazy_l2 and name in ("E", "E_UC", "E_IC"):
                rows = grads.touched_rows(name)
                g[rows] += two_l2 * table[rows]
            else:
                g += two_l2 * table

    breakdown = LossBreakdown(bpr=bpr, similarity=sim, l2=l2,
                              total=bpr + cfg.lambda1 * sim + cfg.lambda2 * l2,
                              lambda1=cfg.lambda1, lambda2=cfg.lambda2)
    return breakdown, grads
