import time

import numpy as np

from attnrec.config import TrainConfig
from attnrec.evaluation import evaluate, training_recall
from attnrec.graph import InteractionGraph, SplitDataset
from attnrec.training import train


def block_dataset(num_users=50, num_items=50, blocks=5, p=0.8, seed=0):
    rng = np.random.default_rng(seed)
    per_u = num_users // blocks
    per_i = num_items // blocks
    edges = []
    for u in range(num_users):
        b = u // per_u
        for i in range(b * per_i, (b + 1) * per_i):
            if rng.random() < p:
                edges.append((u, i))
    # make sure every user and item has at least one edge
    us = {e[0] for e in edges}
    its = {e[1] for e in edges}
    for u in range(num_users):
        if u not in us:
            b = u // per_u
            edges.append((u, b * per_i))
    for i in range(num_items):
        if i not in its:
            b = i // per_i
            edges.append((b * per_u, i))
    edges = sorted(set(edges))
    rng.shuffle(edges)
    # hold out one item per user for validation
    valid = []
    train_edges = []
    seen = set()
    for u, i in edges:
        if u not in seen and sum(1 for e in edges if e[0] == u) > 1:
            valid.append((u, i))
            seen.add(u)
        else:
            train_edges.append((u, i))
    # items in valid must still exist in train
    train_items = {i for _, i in train_edges}
    fixed_valid = []
    for u, i in valid:
        if i in train_items:
            fixed_valid.append((u, i))
        else:
            train_edges.append((u, i))
    g = InteractionGraph(num_users, num_items,
                         np.array([e[0] for e in train_edges]),
                         np.array([e[1] for e in train_edges]))
    return SplitDataset(train=g, validation=fixed_valid, test=list(fixed_valid), seed=seed)


ds = block_dataset()
print("train edges:", ds.train.num_interactions, "valid:", len(ds.validation))

for lr, bs, epochs in [(5e-3, 256, 100), (5e-3, 256, 200), (1e-2, 256, 150)]:
    cfg = TrainConfig(d0=16, d1=16, d2=16, d3=16, batch_size=bs, learning_rate=lr,
                      max_epochs=epochs, eval_every=50, patience=100, seed=1,
                      num_pos=5, num_neg=5, fan_in=64, k=20)
    t0 = time.time()
    final = []
    report = train(ds, cfg, final_params=final)
    params = final[0]
    tr = training_recall(params, ds.train, k=20, slope=cfg.leaky_slope)
    val = evaluate(params, ds, split="validation", k=20, slope=cfg.leaky_slope)
    print(f"lr={lr} bs={bs} ep={epochs}: train recall@20={tr:.3f} "
          f"valid recall={val.recall_at_k:.3f} last total={report.epochs[-1]['total']:.4f} "
          f"({time.time()-t0:.1f}s)")
