import time

import numpy as np

from scratch_overfit import block_dataset
from attnrec.config import TrainConfig
from attnrec.evaluation import evaluate, training_recall
from attnrec.training import train

ds = block_dataset()

print("--- overfit calibration ---")
for lr, bs, epochs in [(1e-3, 64, 200), (2e-3, 128, 200), (1e-3, 128, 200)]:
    cfg = TrainConfig(d0=16, d1=16, d2=16, d3=16, batch_size=bs, learning_rate=lr,
                      max_epochs=epochs, eval_every=1000, patience=1000, seed=1, k=20)
    t0 = time.time()
    final = []
    report = train(ds, cfg, final_params=final)
    tr = training_recall(final[0], ds.train, k=20, slope=cfg.leaky_slope)
    print(f"lr={lr} bs={bs} ep={epochs}: train recall={tr:.3f} "
          f"final loss={report.epochs[-1]['total']:.4f} ({time.time()-t0:.1f}s)")

print("--- monotonicity at lr 1e-3, 50 epochs ---")
cfg = TrainConfig(d0=16, d1=16, d2=16, d3=16, batch_size=128, learning_rate=1e-3,
                  max_epochs=50, eval_every=1000, patience=1000, seed=5, k=20)
report = train(ds, cfg)
totals = [e["total"] for e in report.epochs]
drops = sum(1 for a, b in zip(totals, totals[1:]) if b <= a)
print(f"non-increasing pairs: {drops}/{len(totals)-1}, first={totals[0]:.4f} last={totals[-1]:.4f}")

print("--- ablation direction across seeds ---")
for seed in (1, 2, 3):
    row = {}
    for variant, flags in [("full", {}), ("sl", {"no_similarity": True}),
                           ("am", {"no_adaptive_margin": True})]:
        cfg = TrainConfig(d0=16, d1=16, d2=16, d3=16, batch_size=128, learning_rate=2e-3,
                          max_epochs=60, eval_every=20, patience=1000, seed=seed, k=20,
                          **flags)
        final = []
        report = train(ds, cfg, final_params=final)
        val = evaluate(final[0], ds, split="validation", k=20, slope=cfg.leaky_slope)
        row[variant] = val.recall_at_k
    print(f"seed {seed}: {row}  full>=sl: {row['full'] >= row['sl']}  full>=am: {row['full'] >= row['am']}")
