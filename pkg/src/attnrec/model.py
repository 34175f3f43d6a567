"""Trainable parameters and the two-layer forward pass with exact analytic
gradients.

Layer 1 (warm-up) propagates base embeddings over the full first-hop
neighborhood with fixed symmetric weights 1/sqrt(deg_u * deg_i); layer 2
re-weights a sampled neighbor set through a learned tanh attention score and
aggregates with a sum branch and an elementwise-product branch. Scores are
inner products of [base || layer-2] concatenations.

Backward is hand-derived reverse-mode over cached pre-activations; no autodiff
dependency. Gradients for embedding tables are dense zero tables with only
touched rows filled, which is what the sparse optimizer path consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import EmptyDatasetError, ShapeError
from .graph import InteractionGraph
from .sampling import MiniBatch

TABLE_NAMES = ("E", "E_UC", "E_IC", "W0", "W1", "W2", "P", "V")


@dataclass
class Params:
    """All trainable tables plus the shape metadata needed to rebuild them."""

    E: np.ndarray      # (N+M, d0) base embeddings, users first
    E_UC: np.ndarray   # (N, d0) user context table (similarity loss only)
    E_IC: np.ndarray   # (M, d0) item context table
    W0: np.ndarray     # (d1, d0) warm-up transform
    W1: np.ndarray     # (d3, d1) attention sum branch
    W2: np.ndarray     # (d3, d1) attention product branch
    P: np.ndarray      # (d2, 2*d1) attention projection
    V: np.ndarray      # (d2,) attention readout
    num_users: int
    num_items: int
    seed: int

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.E.shape[1], self.W0.shape[0], self.P.shape[0], self.W1.shape[0])

    def tables(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TABLE_NAMES}

    def copy(self) -> "Params":
        return Params(**{name: getattr(self, name).copy() for name in TABLE_NAMES},
                      num_users=self.num_users, num_items=self.num_items, seed=self.seed)

    def user_base(self) -> np.ndarray:
        return self.E[: self.num_users]

    def item_base(self) -> np.ndarray:
        return self.E[self.num_users :]


@dataclass
class GradientSet:
    """One dense accumulator per trainable table, zeroed on creation."""

    E: np.ndarray
    E_UC: np.ndarray
    E_IC: np.ndarray
    W0: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    P: np.ndarray
    V: np.ndarray

    @classmethod
    def zeros_like(cls, params: Params) -> "GradientSet":
        return cls(**{name: np.zeros_like(getattr(params, name)) for name in TABLE_NAMES})

    def tables(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TABLE_NAMES}

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tables().values())

    def touched_rows(self, name: str) -> np.ndarray:
        """Indices of rows with any nonzero entry (embedding tables only)."""
        g = getattr(self, name)
        return np.nonzero(np.any(g != 0.0, axis=1))[0]


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(dims: tuple[int, int, int, int], counts: tuple[int, int], seed: int) -> Params:
    """Glorot-uniform tables, each bounded by sqrt(6/(fan_in+fan_out))."""
    d0, d1, d2, d3 = dims
    n, m = counts
    if min(dims) < 1:
        raise ShapeError(f"all dims must be >= 1, got {dims}")
    if n < 1 or m < 1:
        raise EmptyDatasetError(f"need at least one user and one item, got N={n}, M={m}")
    rng = np.random.default_rng(seed)
    E = rng.uniform(-glorot_bound(n + m, d0), glorot_bound(n + m, d0), size=(n + m, d0))
    E_UC = rng.uniform(-glorot_bound(n, d0), glorot_bound(n, d0), size=(n, d0))
    E_IC = rng.uniform(-glorot_bound(m, d0), glorot_bound(m, d0), size=(m, d0))
    W0 = rng.uniform(-glorot_bound(d0, d1), glorot_bound(d0, d1), size=(d1, d0))
    W1 = rng.uniform(-glorot_bound(d1, d3), glorot_bound(d1, d3), size=(d3, d1))
    W2 = rng.uniform(-glorot_bound(d1, d3), glorot_bound(d1, d3), size=(d3, d1))
    P = rng.uniform(-glorot_bound(2 * d1, d2), glorot_bound(2 * d1, d2), size=(d2, 2 * d1))
    V = rng.uniform(-glorot_bound(d2, 1), glorot_bound(d2, 1), size=d2)
    return Params(E=E, E_UC=E_UC, E_IC=E_IC, W0=W0, W1=W1, W2=W2, P=P, V=V,
                  num_users=n, num_items=m, seed=seed)


def leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x >= 0, x, slope * x)


def leaky_relu_grad(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x >= 0, 1.0, slope)


def warmup_weight(deg_u: int, deg_i: int) -> float:
    """Fixed propagation weight 1/sqrt(deg_u * deg_i) for one edge."""
    if deg_u < 1 or deg_i < 1:
        raise ShapeError(f"degrees must be >= 1, got ({deg_u}, {deg_i})")
    return 1.0 / float(np.sqrt(deg_u * deg_i))


def warmup_forward(adj: sp.csr_matrix, E: np.ndarray, W0: np.ndarray,
                   nodes: np.ndarray, slope: float = 0.2):
    """First propagation layer for the given nodes over their full
    neighborhoods. Returns (z, pre1, e1) restricted to `nodes` order, where
    z = e0_node + sum_w(neighbors), pre1 = z @ W0^T, e1 = LeakyReLU(pre1)."""
    rows = adj[nodes]
    z = E[nodes] + rows @ E
    pre1 = z @ W0.T
    return z, pre1, leaky_relu(pre1, slope)


def attention_score(e1_u: np.ndarray, e1_i: np.ndarray, P: np.ndarray, V: np.ndarray) -> float:
    """V^T tanh(P [e1_u || e1_i]) for a single center/neighbor pair."""
    return float(V @ np.tanh(P @ np.concatenate([e1_u, e1_i])))


def attention_normalize(scores: np.ndarray) -> np.ndarray:
    """Max-shifted softmax over one node's sampled neighbor scores."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ShapeError("cannot normalize an empty score set")
    e = np.exp(scores - scores.max())
    return e / e.sum()


def attention_aggregate(e1_node: np.ndarray, neighbor_e1s: np.ndarray, weights: np.ndarray,
                        W1: np.ndarray, W2: np.ndarray, slope: float = 0.2) -> np.ndarray:
    """LeakyReLU(W1 (e1 + s)) + LeakyReLU(W2 (e1 * s)) with s the
    attention-weighted neighbor sum."""
    s = weights @ neighbor_e1s
    return leaky_relu(W1 @ (e1_node + s), slope) + leaky_relu(W2 @ (e1_node * s), slope)


def predict(e0_a: np.ndarray, e2_a: np.ndarray, e0_b: np.ndarray, e2_b: np.ndarray) -> float:
    """Inner product of the concatenated [base || propagated] vectors."""
    return float(e0_a @ e0_b + e2_a @ e2_b)


@dataclass
class ForwardTrace:
    """Cached intermediates of one batch forward, exactly what backward needs."""

    needed: np.ndarray          # sorted node ids with valid warm-up rows
    a_rows: sp.csr_matrix       # adjacency slice used in warm-up (len(needed) x N+M)
    z: np.ndarray               # (K, d0) aggregated warm-up inputs
    pre1: np.ndarray            # (K, d1)
    e1: np.ndarray              # (K, d1)
    centers: np.ndarray         # (C,) node ids
    c_pos: np.ndarray           # (C,) positions of centers in `needed`
    nbr_flat: np.ndarray        # flat neighbor node ids
    nbr_pos: np.ndarray         # positions of neighbors in `needed`
    rep: np.ndarray             # center row index per flat edge
    seg_ptr: np.ndarray
    t: np.ndarray               # (F, d2) tanh pre-readout
    pi: np.ndarray              # (F,) attention weights
    agg: np.ndarray             # (C, d1)
    a1: np.ndarray              # (C, d3) pre-activation, sum branch
    a2: np.ndarray              # (C, d3) pre-activation, product branch
    e2: np.ndarray              # (C, d3)
    slope: float


def segment_softmax(scores: np.ndarray, seg_ptr: np.ndarray, rep: np.ndarray) -> np.ndarray:
    seg_max = np.maximum.reduceat(scores, seg_ptr[:-1])
    e = np.exp(scores - seg_max[rep])
    seg_sum = np.add.reduceat(e, seg_ptr[:-1])
    return e / seg_sum[rep]


def forward_centers(params: Params, adj: sp.csr_matrix, centers: np.ndarray,
                    nbr_flat: np.ndarray, seg_ptr: np.ndarray, slope: float) -> ForwardTrace:
    """Warm-up then attention for the given centers and their sampled
    neighbor lists (flattened, with seg_ptr offsets)."""
    if len(centers) == 0:
        raise ShapeError("forward needs at least one center node")
    counts = np.diff(seg_ptr)
    if np.any(counts < 1):
        raise ShapeError("every center needs at least one sampled neighbor")

    needed = np.unique(np.concatenate([centers, nbr_flat]))
    a_rows = adj[needed]
    z = params.E[needed] + a_rows @ params.E
    pre1 = z @ params.W0.T
    e1 = leaky_relu(pre1, slope)
    c_pos = np.searchsorted(needed, centers)
    nbr_pos = np.searchsorted(needed, nbr_flat)
    rep = np.repeat(np.arange(len(centers)), counts)

    d1 = params.W0.shape[0]
    p_left, p_right = params.P[:, :d1], params.P[:, d1:]
    h = e1[c_pos][rep] @ p_left.T + e1[nbr_pos] @ p_right.T
    t = np.tanh(h)
    scores = t @ params.V
    pi = segment_softmax(scores, seg_ptr, rep)

    agg = np.add.reduceat(pi[:, None] * e1[nbr_pos], seg_ptr[:-1], axis=0)
    e1_c = e1[c_pos]
    a1 = (e1_c + agg) @ params.W1.T
    a2 = (e1_c * agg) @ params.W2.T
    e2 = leaky_relu(a1, slope) + leaky_relu(a2, slope)

    return ForwardTrace(needed=needed, a_rows=a_rows, z=z, pre1=pre1, e1=e1,
                        centers=centers, c_pos=c_pos, nbr_flat=nbr_flat, nbr_pos=nbr_pos,
                        rep=rep, seg_ptr=seg_ptr, t=t, pi=pi, agg=agg,
                        a1=a1, a2=a2, e2=e2, slope=slope)


def backward_centers(params: Params, trace: ForwardTrace, d_e2: np.ndarray,
                     grads: GradientSet) -> None:
    """Accumulate gradients of everything reached through the propagation
    layers (E via warm-up, W0, W1, W2, P, V) given upstream d loss / d e2.

    The direct base-embedding term of the prediction and the similarity loss
    touch E / E_UC / E_IC without passing through here.
    """
    if d_e2.shape != trace.e2.shape:
        raise ShapeError(f"upstream shape {d_e2.shape} != e2 shape {trace.e2.shape}")
    slope = trace.slope
    e1 = trace.e1
    e1_c = e1[trace.c_pos]
    e1_n = e1[trace.nbr_pos]

    # attention aggregation: e2 = lrelu(W1 (e1_c + agg)) + lrelu(W2 (e1_c * agg))
    da1 = d_e2 * leaky_relu_grad(trace.a1, slope)
    da2 = d_e2 * leaky_relu_grad(trace.a2, slope)
    grads.W1 += da1.T @ (e1_c + trace.agg)
    grads.W2 += da2.T @ (e1_c * trace.agg)
    u1 = da1 @ params.W1
    u2 = da2 @ params.W2
    d_e1_centers = u1 + u2 * trace.agg
    d_agg = u1 + u2 * e1_c

    # agg = sum_s pi_s e1_s
    d_agg_rep = d_agg[trace.rep]
    d_pi = np.einsum("fd,fd->f", d_agg_rep, e1_n)
    d_e1_nbr = trace.pi[:, None] * d_agg_rep

    # softmax over each center's segment
    seg_dot = np.add.reduceat(trace.pi * d_pi, trace.seg_ptr[:-1])
    d_score = trace.pi * (d_pi - seg_dot[trace.rep])

    # score = V . tanh(P [e1_c || e1_s])
    grads.V += d_score @ trace.t
    dh = (d_score[:, None] * params.V[None, :]) * (1.0 - trace.t ** 2)
    d1 = params.W0.shape[0]
    p_left, p_right = params.P[:, :d1], params.P[:, d1:]
    grads.P[:, :d1] += dh.T @ e1_c[trace.rep]
    grads.P[:, d1:] += dh.T @ e1_n
    d_e1_centers += np.add.reduceat(dh @ p_left, trace.seg_ptr[:-1], axis=0)
    d_e1_nbr += dh @ p_right

    # collect per-node e1 gradients over the needed set
    d_e1 = np.zeros_like(e1)
    np.add.at(d_e1, trace.c_pos, d_e1_centers)
    np.add.at(d_e1, trace.nbr_pos, d_e1_nbr)

    # warm-up: e1 = lrelu(W0 z), z = e0_node + A_rows e0
    d_pre1 = d_e1 * leaky_relu_grad(trace.pre1, slope)
    grads.W0 += d_pre1.T @ trace.z
    dz = d_pre1 @ params.W0
    np.add.at(grads.E, trace.needed, dz)
    grads.E += trace.a_rows.T @ dz


def capped_adjacency(graph: InteractionGraph, cap: int, rng: np.random.Generator) -> sp.csr_matrix:
    """Optional warm-up fan-in cap: per node, keep at most `cap` uniformly
    chosen neighbors, weights unchanged. Resampled per call."""
    full = graph.normalized_adjacency().tocsr()
    indptr, indices, data = full.indptr, full.indices, full.data
    counts = np.diff(indptr)
    keep = np.ones(len(indices), dtype=bool)
    kept_counts = counts.copy()
    for r in np.nonzero(counts > cap)[0]:
        lo, hi = indptr[r], indptr[r + 1]
        drop = rng.choice(hi - lo, size=(hi - lo) - cap, replace=False)
        keep[lo + drop] = False
        kept_counts[r] = cap
    new_indptr = np.concatenate(([0], np.cumsum(kept_counts)))
    return sp.csr_matrix((data[keep], indices[keep], new_indptr), shape=full.shape)


def forward_batch(params: Params, adj: sp.csr_matrix, batch: MiniBatch,
                  slope: float) -> tuple[ForwardTrace, np.ndarray, np.ndarray, np.ndarray]:
    """Forward for a minibatch; returns the trace and raw scores
    (y_ui, y_uj, y_ij) per triple."""
    trace = forward_centers(params, adj, batch.centers, batch.nbr_flat, batch.seg_ptr, slope)
    n = params.num_users
    e0_u, e0_i, e0_j = params.E[batch.u], params.E[batch.i + n], params.E[batch.j + n]
    e2_u, e2_i, e2_j = trace.e2[batch.slot_u], trace.e2[batch.slot_i], trace.e2[batch.slot_j]
    y_ui = np.einsum("bd,bd->b", e0_u, e0_i) + np.einsum("bd,bd->b", e2_u, e2_i)
    y_uj = np.einsum("bd,bd->b", e0_u, e0_j) + np.einsum("bd,bd->b", e2_u, e2_j)
    y_ij = np.einsum("bd,bd->b", e0_i, e0_j) + np.einsum("bd,bd->b", e2_i, e2_j)
    return trace, y_ui, y_uj, y_ij


def _chunk_by_edges(counts: np.ndarray, budget: int):
    """Split [0, len(counts)) into contiguous chunks whose edge totals stay
    near `budget`."""
    start = 0
    total = 0
    for idx, c in enumerate(counts):
        total += int(c)
        if total >= budget and idx + 1 > start:
            yield start, idx + 1
            start = idx + 1
            total = 0
    if start < len(counts):
        yield start, len(counts)


def compute_all_embeddings(params: Params, graph: InteractionGraph, adj: sp.csr_matrix,
                           slope: float, edge_budget: int = 500_000):
    """Deterministic full-neighborhood forward for every node; used at
    evaluation time. Returns (user_star, item_star) concatenated tables."""
    n, m = graph.num_users, graph.num_items
    degrees = np.concatenate([graph.user_degree, graph.item_degree])
    if np.any(degrees == 0):
        raise ShapeError("evaluation forward requires every node to have a training edge")
    all_nodes = np.arange(n + m, dtype=np.int64)
    _, _, e1 = warmup_forward(adj, params.E, params.W0, all_nodes, slope)

    d1 = params.W0.shape[0]
    d3 = params.W1.shape[0]
    p_left, p_right = params.P[:, :d1], params.P[:, d1:]
    e2 = np.zeros((n + m, d3))
    nbr_all = np.concatenate([graph._user_nbr + n, graph._item_nbr])
    ptr_all = np.concatenate([graph._user_ptr, graph._item_ptr[1:] + graph._user_ptr[-1]])

    for lo, hi in _chunk_by_edges(degrees, edge_budget):
        centers = all_nodes[lo:hi]
        seg_ptr = ptr_all[lo : hi + 1] - ptr_all[lo]
        nbr = nbr_all[ptr_all[lo] : ptr_all[hi]]
        counts = np.diff(seg_ptr)
        rep = np.repeat(np.arange(len(centers)), counts)
        h = e1[centers][rep] @ p_left.T + e1[nbr] @ p_right.T
        t = np.tanh(h)
        pi = segment_softmax(t @ params.V, seg_ptr, rep)
        agg = np.add.reduceat(pi[:, None] * e1[nbr], seg_ptr[:-1], axis=0)
        e1_c = e1[centers]
        e2[lo:hi] = (leaky_relu((e1_c + agg) @ params.W1.T, slope)
                     + leaky_relu((e1_c * agg) @ params.W2.T, slope))

    star = np.concatenate([params.E, e2], axis=1)
    return star[:n], star[n:]
