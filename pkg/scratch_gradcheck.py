import numpy as np

from attnrec.config import TrainConfig
from attnrec.graph import InteractionGraph
from attnrec.losses import total_loss, total_loss_and_gradients
from attnrec.model import TABLE_NAMES, init_params
from attnrec.sampling import build_minibatch

rng = np.random.default_rng(7)
n_users, n_items = 5, 6
edges = set()
for u in range(n_users):
    k = rng.integers(2, 5)
    for i in rng.choice(n_items, size=k, replace=False):
        edges.add((u, int(i)))
for i in range(n_items):
    if not any(e[1] == i for e in edges):
        edges.add((int(rng.integers(0, n_users)), i))
us = np.array([e[0] for e in edges])
its = np.array([e[1] for e in edges])
graph = InteractionGraph(n_users, n_items, us, its)
adj = graph.normalized_adjacency()

cfg = TrainConfig(d0=4, d1=4, d2=4, d3=4, batch_size=3, fan_in=2, num_pos=1, num_neg=1,
                  lambda1=1e-2, lambda2=1e-3, detach_margin=False, seed=3)
params = init_params(cfg.dims, (n_users, n_items), cfg.seed)
batch = build_minibatch(graph, cfg.batch_size, cfg.fan_in, cfg.num_pos, cfg.num_neg,
                        np.random.default_rng(11))

breakdown, grads = total_loss_and_gradients(params, adj, batch, cfg)
print("loss:", breakdown)

h = 1e-5
worst = 0.0
for name in TABLE_NAMES:
    table = getattr(params, name)
    g = getattr(grads, name)
    it = np.nditer(table, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = table[idx]
        table[idx] = orig + h
        lp = total_loss(params, adj, batch, cfg).total
        table[idx] = orig - h
        lm = total_loss(params, adj, batch, cfg).total
        table[idx] = orig
        fd = (lp - lm) / (2 * h)
        an = g[idx]
        denom = max(abs(fd), abs(an), 1e-7)
        rel = abs(fd - an) / denom
        if rel > worst:
            worst = rel
            print(f"  {name}{idx}: fd={fd:+.8f} an={an:+.8f} rel={rel:.2e}")
print("worst rel error:", worst)
