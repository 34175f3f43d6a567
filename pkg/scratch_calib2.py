import time

import numpy as np

from scratch_overfit import block_dataset
from attnrec.config import TrainConfig
from attnrec.evaluation import training_recall
from attnrec.graph import InteractionGraph, SplitDataset
from attnrec.training import train


def random_dataset(num_users=30, num_items=40, deg=5, seed=0):
    rng = np.random.default_rng(seed)
    edges = set()
    for u in range(num_users):
        for i in rng.choice(num_items, size=deg, replace=False):
            edges.add((u, int(i)))
    for i in range(num_items):
        if not any(e[1] == i for e in edges):
            edges.add((int(rng.integers(num_users)), i))
    edges = sorted(edges)
    g = InteractionGraph(num_users, num_items,
                         np.array([e[0] for e in edges]),
                         np.array([e[1] for e in edges]))
    return SplitDataset(train=g, validation=[], test=[], seed=seed)


print("--- overfit calibration (block dataset) ---")
ds_block = block_dataset()
for lr, bs, epochs in [(1e-3, 64, 200), (2e-3, 128, 200), (2e-3, 128, 120)]:
    cfg = TrainConfig(d0=16, d1=16, d2=16, d3=16, batch_size=bs, learning_rate=lr,
                      max_epochs=epochs, eval_every=1000, patience=1000, seed=1, k=20)
    t0 = time.time()
    final = []
    report = train(ds_block, cfg, final_params=final)
    tr = training_recall(final[0], ds_block.train, k=20, slope=cfg.leaky_slope)
    print(f"lr={lr} bs={bs} ep={epochs}: train recall={tr:.3f} "
          f"final loss={report.epochs[-1]['total']:.4f} ({time.time()-t0:.1f}s)")

print("--- monotonicity on random tiny dataset, lr 1e-3, 50 epochs ---")
for seed in (0, 5, 9):
    ds = random_dataset(seed=seed)
    cfg = TrainConfig(d0=8, d1=8, d2=8, d3=8, batch_size=128, learning_rate=1e-3,
                      max_epochs=50, eval_every=1000, patience=1000, seed=seed, k=20)
    report = train(ds, cfg)
    totals = [e["total"] for e in report.epochs]
    drops = sum(1 for a, b in zip(totals, totals[1:]) if b <= a)
    print(f"seed {seed}: non-increasing {drops}/{len(totals)-1}, "
          f"first={totals[0]:.4f} last={totals[-1]:.4f}")
