from scratch_calib2 import random_dataset
from attnrec.config import TrainConfig
from attnrec.training import train

for label, flags in [("flow-through margin", {"detach_margin": False}),
                     ("no adaptive margin", {"no_adaptive_margin": True}),
                     ("detached, lr 3e-4", {"learning_rate": 3e-4})]:
    results = []
    for seed in (0, 1, 2):
        ds = random_dataset(num_users=100, num_items=100, deg=10, seed=seed)
        cfg = TrainConfig(d0=8, d1=8, d2=8, d3=8, batch_size=64, learning_rate=1e-3,
                          max_epochs=50, eval_every=1000, patience=1000, seed=seed, k=20)
        cfg = cfg.replace(**flags)
        report = train(ds, cfg)
        totals = [e["total"] for e in report.epochs]
        drops = sum(1 for a, b in zip(totals, totals[1:]) if b <= a)
        results.append((drops, totals[0], totals[-1]))
    print(f"{label}: " + "; ".join(f"{d}/49 {a:.3f}->{b:.3f}" for d, a, b in results))
