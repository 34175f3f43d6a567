"""Per-batch sampling: ranking triples, fixed-fan-in neighbor sets, and
2-order similarity pairs. Everything is a pure function of (graph, args, rng
state), so one seeded generator reproduces a batch exactly.

RNG call order inside build_minibatch is fixed: triples, then neighbor sets
in ascending unified-node order, then user similarity pairs in ascending user
order, then item similarity pairs in ascending item order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SamplingError
from .graph import InteractionGraph


@dataclass
class TrainTriple:
    u: int
    i: int
    j: int


@dataclass
class NeighborSample:
    node: int  # unified id
    neighbors: np.ndarray  # unified ids, <= fan_in of them
    fan_in: int


@dataclass
class SimilarityPairSet:
    anchor: int  # same-side index (user index or item index)
    positives: np.ndarray
    negatives: np.ndarray
    incomplete: bool = False  # fewer positives than requested were reachable


@dataclass
class MiniBatch:
    """One training step's worth of sampled structure.

    triples reference centers through slot arrays; each distinct node involved
    in a forward pass appears exactly once in `centers` with one neighbor set.
    """

    u: np.ndarray
    i: np.ndarray
    j: np.ndarray
    centers: np.ndarray  # sorted unique unified ids
    slot_u: np.ndarray
    slot_i: np.ndarray
    slot_j: np.ndarray
    nbr_flat: np.ndarray  # concatenated neighbor ids per center
    seg_ptr: np.ndarray  # len(centers)+1 offsets into nbr_flat
    user_sim: list[SimilarityPairSet] = field(default_factory=list)
    item_sim: list[SimilarityPairSet] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.u)


def sample_triples(graph: InteractionGraph, batch_size: int, rng: np.random.Generator,
                   retry_limit: int = 100) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform users with replacement, uniform positive per user, and a
    uniform negative rejection-sampled outside the user's adjacency."""
    if batch_size < 1:
        raise SamplingError(f"batch_size must be >= 1, got {batch_size}")
    n, m = graph.num_users, graph.num_items
    u = rng.integers(0, n, size=batch_size)
    deg = graph.user_degree[u]
    if np.any(deg == 0):
        raise SamplingError("sampled a user with no training interactions")
    pos_off = rng.integers(0, deg)
    i = graph._user_nbr[graph._user_ptr[u] + pos_off]

    j = rng.integers(0, m, size=batch_size)
    bad = graph.has_edge(u, j)
    tries = 0
    while np.any(bad) and tries < retry_limit:
        j[bad] = rng.integers(0, m, size=int(bad.sum()))
        bad = graph.has_edge(u, j)
        tries += 1
    if np.any(bad):
        # exact uniform draw over the complement for the stubborn rows
        for row in np.nonzero(bad)[0]:
            pool = np.setdiff1d(np.arange(m, dtype=np.int64), graph.user_adj(u[row]))
            if len(pool) == 0:
                raise SamplingError(
                    f"user {u[row]} interacts with every item; no negative exists")
            j[row] = pool[rng.integers(0, len(pool))]
    return u.astype(np.int64), i.astype(np.int64), j.astype(np.int64)


def sample_neighbors(graph: InteractionGraph, node: int, side: str, fan_in: int,
                     rng: np.random.Generator) -> NeighborSample:
    """Full neighborhood when degree <= fan_in, else a uniform subset without
    replacement. Returned ids are unified."""
    if side == "user":
        adj = graph.user_adj(node) + graph.num_users
        unified = node
    elif side == "item":
        adj = graph.item_adj(node)
        unified = node + graph.num_users
    else:
        raise ValueError(f"side must be 'user' or 'item', got {side!r}")
    if len(adj) == 0:
        raise SamplingError(f"{side} {node} has an empty neighborhood")
    if len(adj) <= fan_in:
        neighbors = adj.copy()
    else:
        neighbors = rng.choice(adj, size=fan_in, replace=False)
    return NeighborSample(node=unified, neighbors=np.sort(neighbors), fan_in=fan_in)


def sample_similarity_pairs(graph: InteractionGraph, anchor: int, side: str,
                            num_pos: int, num_neg: int, rng: np.random.Generator,
                            retry_limit: int = 100) -> SimilarityPairSet:
    """Positives by out-and-back length-2 walks (anchor -> opposite neighbor ->
    same side), redrawn when the walk lands on the anchor; negatives uniform
    over the same side excluding the anchor."""
    if side == "user":
        first_hop = graph.user_adj(anchor)
        second_adj = graph.item_adj
        side_count = graph.num_users
    elif side == "item":
        first_hop = graph.item_adj(anchor)
        second_adj = graph.user_adj
        side_count = graph.num_items
    else:
        raise ValueError(f"side must be 'user' or 'item', got {side!r}")
    if len(first_hop) == 0:
        raise SamplingError(f"{side} {anchor} has an empty neighborhood")

    positives = []
    incomplete = False
    for _ in range(num_pos):
        found = False
        for _ in range(retry_limit):
            mid = first_hop[rng.integers(0, len(first_hop))]
            hop2 = second_adj(int(mid))
            cand = hop2[rng.integers(0, len(hop2))]
            if cand != anchor:
                positives.append(int(cand))
                found = True
                break
        if not found:
            incomplete = True
    negatives = []
    if num_neg > 0 and side_count < 2:
        raise SamplingError(f"cannot sample a non-anchor negative with {side_count} {side}s")
    for _ in range(num_neg):
        r = int(rng.integers(0, side_count - 1))
        negatives.append(r + 1 if r >= anchor else r)
    return SimilarityPairSet(anchor=anchor,
                             positives=np.array(positives, dtype=np.int64),
                             negatives=np.array(negatives, dtype=np.int64),
                             incomplete=incomplete)


def build_minibatch(graph: InteractionGraph, batch_size: int, fan_in: int,
                    num_pos: int, num_neg: int, rng: np.random.Generator,
                    retry_limit: int = 100) -> MiniBatch:
    """Assemble one deterministic MiniBatch. Similarity anchors are the batch's
    distinct users and distinct positive items."""
    u, i, j = sample_triples(graph, batch_size, rng, retry_limit=retry_limit)
    n = graph.num_users
    centers = np.unique(np.concatenate([u, i + n, j + n]))
    nbr_lists = []
    for node in centers:
        if node < n:
            ns = sample_neighbors(graph, int(node), "user", fan_in, rng)
        else:
            ns = sample_neighbors(graph, int(node) - n, "item", fan_in, rng)
        nbr_lists.append(ns.neighbors)
    seg_ptr = np.concatenate(([0], np.cumsum([len(x) for x in nbr_lists]))).astype(np.int64)
    nbr_flat = (np.concatenate(nbr_lists) if nbr_lists else np.empty(0, np.int64)).astype(np.int64)

    user_sim = [sample_similarity_pairs(graph, int(a), "user", num_pos, num_neg, rng,
                                        retry_limit=retry_limit)
                for a in np.unique(u)]
    item_sim = [sample_similarity_pairs(graph, int(a), "item", num_pos, num_neg, rng,
                                        retry_limit=retry_limit)
                for a in np.unique(i)]

    return MiniBatch(
        u=u, i=i, j=j,
        centers=centers,
        slot_u=np.searchsorted(centers, u),
        slot_i=np.searchsorted(centers, i + n),
        slot_j=np.searchsorted(centers, j + n),
        nbr_flat=nbr_flat,
        seg_ptr=seg_ptr,
        user_sim=user_sim,
        item_sim=item_sim,
    )
