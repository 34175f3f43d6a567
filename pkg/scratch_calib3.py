import numpy as np

from scratch_calib2 import random_dataset
from attnrec.config import TrainConfig
from attnrec.training import train

print("--- monotonicity, larger tiny dataset, more steps/epoch ---")
for nu, ni, deg, bs, lr, d in [(100, 100, 10, 128, 1e-3, 8),
                               (100, 100, 10, 64, 1e-3, 8),
                               (120, 120, 12, 64, 1e-3, 8)]:
    results = []
    for seed in (0, 1, 2):
        ds = random_dataset(num_users=nu, num_items=ni, deg=deg, seed=seed)
        cfg = TrainConfig(d0=d, d1=d, d2=d, d3=d, batch_size=bs, learning_rate=lr,
                          max_epochs=50, eval_every=1000, patience=1000, seed=seed, k=20)
        report = train(ds, cfg)
        totals = [e["total"] for e in report.epochs]
        drops = sum(1 for a, b in zip(totals, totals[1:]) if b <= a)
        results.append((drops, totals[0], totals[-1]))
    print(f"N={nu} M={ni} deg={deg} bs={bs} d={d}: "
          + "; ".join(f"{d_}/{49} {a:.3f}->{b:.3f}" for d_, a, b in results))
