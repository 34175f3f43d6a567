import numpy as np

from scratch_overfit import block_dataset
from attnrec.config import TrainConfig
from attnrec.training import train

ds = block_dataset()
cfg = TrainConfig(d0=16, d1=16, d2=16, d3=16, batch_size=256, learning_rate=5e-3,
                  max_epochs=100, eval_every=50, patience=100, seed=1, k=20)
final = []
report = train(ds, cfg, final_params=final)
params = final[0]
for rec in report.epochs[::10] + [report.epochs[-1]]:
    print({k: (round(v, 4) if isinstance(v, float) else v) for k, v in rec.items()})
print("param norms:")
for name, t in params.tables().items():
    print(f"  {name}: max abs {np.abs(t).max():.4f} sumsq {np.sum(t*t):.2f}")
