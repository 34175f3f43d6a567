from scratch_calib2 import random_dataset
from attnrec.config import TrainConfig
from attnrec.training import train

for bs, deg, d in [(1024, 10, 8), (2048, 10, 8), (2048, 20, 8), (4096, 20, 16)]:
    results = []
    for seed in (0, 1, 2):
        ds = random_dataset(num_users=100, num_items=100, deg=deg, seed=seed)
        cfg = TrainConfig(d0=d, d1=d, d2=d, d3=d, batch_size=bs, learning_rate=1e-3,
                          max_epochs=50, eval_every=1000, patience=1000, seed=seed,
                          k=20, detach_margin=False)
        report = train(ds, cfg)
        totals = [e["total"] for e in report.epochs]
        drops = sum(1 for a, b in zip(totals, totals[1:]) if b <= a)
        results.append((drops, totals[0], totals[-1]))
    print(f"bs={bs} deg={deg} d={d}: "
          + "; ".join(f"{dr}/49 {a:.3f}->{b:.3f}" for dr, a, b in results))
