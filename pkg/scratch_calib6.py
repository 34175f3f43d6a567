import time

from scratch_calib2 import random_dataset
from attnrec.config import TrainConfig
from attnrec.training import train

for nu, deg, bs in [(300, 20, 1024), (200, 15, 512), (300, 20, 512)]:
    results = []
    t0 = time.time()
    for seed in (0, 1, 2):
        ds = random_dataset(num_users=nu, num_items=nu, deg=deg, seed=seed)
        cfg = TrainConfig(d0=8, d1=8, d2=8, d3=8, batch_size=bs, learning_rate=1e-3,
                          max_epochs=50, eval_every=1000, patience=1000, seed=seed,
                          k=20, detach_margin=False)
        report = train(ds, cfg)
        totals = [e["total"] for e in report.epochs]
        drops = sum(1 for a, b in zip(totals, totals[1:]) if b <= a)
        results.append((drops, totals[0], totals[-1]))
    print(f"N=M={nu} deg={deg} bs={bs}: "
          + "; ".join(f"{dr}/49 {a:.3f}->{b:.3f}" for dr, a, b in results)
          + f" ({time.time()-t0:.0f}s)")
