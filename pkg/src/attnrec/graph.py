"""Interaction-log ingestion, core filtering, splitting, and the immutable
bipartite adjacency structure everything downstream reads from.

External ids stay strings until `split`, which assigns dense indices in
first-appearance order over the filtered pair list.
"""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DataError, EmptyDatasetError, InvariantError, ParseError

FORMATS = ("tsv", "adjlist")


@dataclass
class RawInteractions:
    """Deduplicated (user, item) external-id pairs in input order."""

    pairs: list[tuple[str, str]]

    def __len__(self):
        return len(self.pairs)


class InteractionGraph:
    """Immutable bipartite graph in CSR-like form on both sides.

    user_adj(u) and item_adj(i) return sorted neighbor index arrays; the two
    sides are mutual transposes. Unified node ids place users at [0, N) and
    items at [N, N+M).
    """

    def __init__(self, num_users: int, num_items: int, users: np.ndarray, items: np.ndarray):
        if num_users <= 0 or num_items <= 0:
            raise EmptyDatasetError("graph must have at least one user and one item")
        self.num_users = int(num_users)
        self.num_items = int(num_items)
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if users.shape != items.shape:
            raise InvariantError("user/item edge arrays differ in length")

        order = np.lexsort((items, users))
        u_sorted, i_sorted = users[order], items[order]
        self.user_degree = np.bincount(u_sorted, minlength=num_users).astype(np.int64)
        self._user_ptr = np.concatenate(([0], np.cumsum(self.user_degree)))
        self._user_nbr = i_sorted

        order_t = np.lexsort((users, items))
        self.item_degree = np.bincount(items[order_t], minlength=num_items).astype(np.int64)
        self._item_ptr = np.concatenate(([0], np.cumsum(self.item_degree)))
        self._item_nbr = users[order_t]

        # sorted u*M+i keys make edge membership one vectorized searchsorted
        self._edge_keys = u_sorted * np.int64(num_items) + i_sorted
        self.num_interactions = int(users.shape[0])

    def user_adj(self, u: int) -> np.ndarray:
        return self._user_nbr[self._user_ptr[u] : self._user_ptr[u + 1]]

    def item_adj(self, i: int) -> np.ndarray:
        return self._item_nbr[self._item_ptr[i] : self._item_ptr[i + 1]]

    def has_edge(self, u, i) -> np.ndarray:
        """Vectorized membership test for (u, i) pairs."""
        keys = np.asarray(u, dtype=np.int64) * np.int64(self.num_items) + np.asarray(i, dtype=np.int64)
        pos = np.searchsorted(self._edge_keys, keys)
        pos = np.minimum(pos, len(self._edge_keys) - 1)
        return self._edge_keys[pos] == keys

    @property
    def num_nodes(self) -> int:
        return self.num_users + self.num_items

    def unified_degree(self, node) -> np.ndarray:
        """Degree lookup in unified-node-id space."""
        node = np.asarray(node, dtype=np.int64)
        is_item = node >= self.num_users
        out = np.where(is_item, self.item_degree[np.minimum(node - self.num_users, self.num_items - 1)],
                       self.user_degree[np.minimum(node, self.num_users - 1)])
        return out

    def unified_adj(self, node: int) -> np.ndarray:
        """Neighbors of a unified node id, themselves as unified ids."""
        if node < self.num_users:
            return self.user_adj(node) + self.num_users
        return self.item_adj(node - self.num_users)

    def normalized_adjacency(self) -> sp.csr_matrix:
        """Symmetric (N+M)x(N+M) CSR with weight 1/sqrt(deg_u * deg_i) per edge."""
        n = self.num_nodes
        row = np.repeat(np.arange(self.num_users, dtype=np.int64), self.user_degree)
        col = self._user_nbr + self.num_users
        w = 1.0 / np.sqrt(self.user_degree[row] * self.item_degree[self._user_nbr])
        a = sp.coo_matrix((np.concatenate([w, w]),
                           (np.concatenate([row, col]), np.concatenate([col, row]))),
                          shape=(n, n))
        return a.tocsr()

    def density(self) -> float:
        return self.num_interactions / (self.num_users * self.num_items)


@dataclass
class SplitDataset:
    """Train graph plus held-out (u, i) pairs, all in dense indices."""

    train: InteractionGraph
    validation: list[tuple[int, int]]
    test: list[tuple[int, int]]
    user_ids: list[str] = field(default_factory=list)  # dense index -> external id
    item_ids: list[str] = field(default_factory=list)
    seed: int | None = None

    @property
    def num_users(self):
        return self.train.num_users

    @property
    def num_items(self):
        return self.train.num_items

    def held_out_by_user(self, split: str) -> dict[int, list[int]]:
        pairs = self.validation if split == "validation" else self.test
        out: dict[int, list[int]] = {}
        for u, i in pairs:
            out.setdefault(u, []).append(i)
        return out


def ingest(path: str, format: str = "tsv") -> RawInteractions:
    """Parse an interaction file into deduplicated pairs, stable input order.

    tsv: one "user<TAB>item" per line. adjlist: "user item1 item2 ... itemK",
    single-space separated. Blank lines are skipped.
    """
    if format not in FORMATS:
        raise DataError(f"unknown format {format!r}, expected one of {FORMATS}")
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    seen: dict[tuple[str, str], None] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if format == "tsv":
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0] or not parts[1]:
                    raise ParseError(path, line_no, f"expected 'user<TAB>item', got {line!r}")
                seen.setdefault((parts[0], parts[1]))
            else:
                parts = line.split(" ")
                if len(parts) < 2:
                    # a user listed with no items contributes nothing
                    if len(parts) == 1 and parts[0]:
                        continue
                    raise ParseError(path, line_no, f"expected 'user item...', got {line!r}")
                user = parts[0]
                for tok in parts[1:]:
                    if not tok:
                        raise ParseError(path, line_no, "empty item token (double space?)")
                    seen.setdefault((user, tok))
    if not seen:
        raise EmptyDatasetError(f"{path} contains no interactions")
    return RawInteractions(list(seen.keys()))


def ten_core_filter(raw: RawInteractions, min_degree: int = 10) -> RawInteractions:
    """Iteratively peel users/items with fewer than `min_degree` interactions
    until a fixpoint; returns the maximal surviving subset in input order."""
    pairs = raw.pairs
    while True:
        ucnt = Counter(p[0] for p in pairs)
        icnt = Counter(p[1] for p in pairs)
        kept = [p for p in pairs if ucnt[p[0]] >= min_degree and icnt[p[1]] >= min_degree]
        if len(kept) == len(pairs):
            break
        pairs = kept
    if not pairs:
        raise EmptyDatasetError(f"no interactions survive {min_degree}-core filtering")
    return RawInteractions(pairs)


def split(raw: RawInteractions, train_frac: float = 0.8, valid_frac: float = 0.1,
          seed: int = 0) -> SplitDataset:
    """Split filtered interactions into train/validation/test.

    Per user: floor(train_frac * degree) pairs to train (at least 1), the rest
    to test. Validation is then carved out of the pooled train pairs, globally
    and uniformly, sized floor(valid_frac * |train pool|). Carve-outs and an
    item-repair pass never leave a train-absent user or item, so held-out
    entities always exist in the train graph.
    """
    if not (0.0 < train_frac < 1.0) or not (0.0 < valid_frac < 1.0):
        raise ConfigError(["train_frac and valid_frac must lie in (0, 1)"])
    rng = np.random.default_rng(seed)

    user_ids: list[str] = []
    item_ids: list[str] = []
    umap: dict[str, int] = {}
    imap: dict[str, int] = {}
    us = np.empty(len(raw.pairs), dtype=np.int64)
    its = np.empty(len(raw.pairs), dtype=np.int64)
    for k, (ue, ie) in enumerate(raw.pairs):
        if ue not in umap:
            umap[ue] = len(user_ids)
            user_ids.append(ue)
        if ie not in imap:
            imap[ie] = len(item_ids)
            item_ids.append(ie)
        us[k] = umap[ue]
        its[k] = imap[ie]
    num_users, num_items = len(user_ids), len(item_ids)

    # per-user split, users visited in dense-index order for determinism
    order = np.argsort(us, kind="stable")
    bounds = np.searchsorted(us[order], np.arange(num_users + 1))
    train_mask = np.zeros(len(raw.pairs), dtype=bool)
    for u in range(num_users):
        rows = order[bounds[u] : bounds[u + 1]]
        if len(rows) < 2:
            raise InvariantError(f"user {user_ids[u]!r} has {len(rows)} interactions post-filter")
        perm = rng.permutation(len(rows))
        n_train = max(1, int(np.floor(train_frac * len(rows))))
        train_mask[rows[perm[:n_train]]] = True

    # repair: an item whose pairs all landed in test would be cold at eval time
    item_train_cnt = np.bincount(its[train_mask], minlength=num_items)
    for i in np.nonzero(item_train_cnt == 0)[0]:
        candidates = np.nonzero((its == i) & ~train_mask)[0]
        train_mask[candidates[0]] = True
        item_train_cnt[i] = 1

    # validation carve-out from the train pool, protected against orphaning
    pool = np.nonzero(train_mask)[0]
    n_valid = int(np.floor(valid_frac * len(pool)))
    user_train_cnt = np.bincount(us[train_mask], minlength=num_users)
    valid_mask = np.zeros(len(raw.pairs), dtype=bool)
    taken = 0
    for row in pool[rng.permutation(len(pool))]:
        if taken >= n_valid:
            break
        u, i = us[row], its[row]
        if user_train_cnt[u] > 1 and item_train_cnt[i] > 1:
            valid_mask[row] = True
            train_mask[row] = False
            user_train_cnt[u] -= 1
            item_train_cnt[i] -= 1
            taken += 1

    test_mask = ~train_mask & ~valid_mask
    train = InteractionGraph(num_users, num_items, us[train_mask], its[train_mask])
    validation = sorted(zip(us[valid_mask].tolist(), its[valid_mask].tolist()))
    test = sorted(zip(us[test_mask].tolist(), its[test_mask].tolist()))
    return SplitDataset(train=train, validation=validation, test=test,
                        user_ids=user_ids, item_ids=item_ids, seed=seed)


def density(graph: InteractionGraph) -> float:
    return graph.density()


# ---------------------------------------------------------------------------
# On-disk layout: train/valid/test adjacency lists + id maps + stats summary
# ---------------------------------------------------------------------------

def _write_adjlist(path: str, pairs_by_user: dict[int, list[int]]):
    with open(path, "w", encoding="utf-8") as fh:
        for u in sorted(pairs_by_user):
            items = " ".join(str(i) for i in sorted(pairs_by_user[u]))
            fh.write(f"{u} {items}\n")


def _read_adjlist(path: str) -> list[tuple[int, int]]:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                u = int(parts[0])
                for tok in parts[1:]:
                    pairs.append((u, int(tok)))
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc)) from exc
    return pairs


def save_split(ds: SplitDataset, out_dir: str, extra_stats: dict | None = None):
    """Write train/valid/test adjacency lists, id maps, and stats.json."""
    os.makedirs(out_dir, exist_ok=True)
    g = ds.train
    train_by_user = {u: g.user_adj(u).tolist() for u in range(g.num_users) if g.user_degree[u] > 0}
    _write_adjlist(os.path.join(out_dir, "train.txt"), train_by_user)
    _write_adjlist(os.path.join(out_dir, "valid.txt"), ds.held_out_by_user("validation"))
    _write_adjlist(os.path.join(out_dir, "test.txt"), ds.held_out_by_user("test"))
    for name, ids in (("user_ids.txt", ds.user_ids), ("item_ids.txt", ds.item_ids)):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            for ext in ids:
                fh.write(f"{ext}\n")
    total = g.num_interactions + len(ds.validation) + len(ds.test)
    stats = {
        "num_users": g.num_users,
        "num_items": g.num_items,
        "interactions": total,
        "train_interactions": g.num_interactions,
        "validation_interactions": len(ds.validation),
        "test_interactions": len(ds.test),
        "density": total / (g.num_users * g.num_items),
        "seed": ds.seed,
    }
    if extra_stats:
        stats.update(extra_stats)
    with open(os.path.join(out_dir, "stats.json"), "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return stats


def load_split(data_dir: str) -> SplitDataset:
    for name in ("train.txt", "valid.txt", "test.txt"):
        if not os.path.isfile(os.path.join(data_dir, name)):
            raise DataError(f"prepared dataset missing {name} in {data_dir}")
    train_pairs = _read_adjlist(os.path.join(data_dir, "train.txt"))
    valid = _read_adjlist(os.path.join(data_dir, "valid.txt"))
    test = _read_adjlist(os.path.join(data_dir, "test.txt"))
    if not train_pairs:
        raise EmptyDatasetError(f"{data_dir}/train.txt has no interactions")
    user_ids: list[str] = []
    item_ids: list[str] = []
    for name, dest in (("user_ids.txt", user_ids), ("item_ids.txt", item_ids)):
        p = os.path.join(data_dir, name)
        if os.path.isfile(p):
            with open(p, "r", encoding="utf-8") as fh:
                dest.extend(line.rstrip("\n") for line in fh)
    us = np.array([p[0] for p in train_pairs], dtype=np.int64)
    its = np.array([p[1] for p in train_pairs], dtype=np.int64)
    all_pairs = train_pairs + valid + test
    num_users = max(p[0] for p in all_pairs) + 1
    num_items = max(p[1] for p in all_pairs) + 1
    if user_ids:
        num_users = max(num_users, len(user_ids))
    if item_ids:
        num_items = max(num_items, len(item_ids))
    seed = None
    stats_path = os.path.join(data_dir, "stats.json")
    if os.path.isfile(stats_path):
        with open(stats_path, "r", encoding="utf-8") as fh:
            seed = json.load(fh).get("seed")
    graph = InteractionGraph(num_users, num_items, us, its)
    return SplitDataset(train=graph, validation=valid, test=test,
                        user_ids=user_ids, item_ids=item_ids, seed=seed)
