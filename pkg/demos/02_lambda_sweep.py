"""Sweep the discrimination/residual mixing weight and plot AUC against it.

The anomaly score blends the critic-feature distance (weight lambda) with
the pixel residual (weight 1 - lambda). Items are scored once; each grid
point just recombines the cached components.

    python3 demos/02_lambda_sweep.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ganad.archspec import ArchitectureConfig
from ganad.data import make_synthetic
from ganad.evaluation import lambda_sweep, write_sweep_csv
from ganad.training import TrainConfig, train

out = Path("runs/demo_sweep")
out.mkdir(parents=True, exist_ok=True)

splits = make_synthetic(n_normal=800, n_anomalous=160, seed=1)
arch = ArchitectureConfig.for_dataset("synthetic")
result = train(splits, arch, TrainConfig(epochs=6, seed=1), out)
bundle = result.bundle.eval_mode()

grid = np.round(np.linspace(0.0, 1.0, 11), 2).tolist()
sweep = lambda_sweep(bundle, splits, grid, beta=1.0)
write_sweep_csv(out / "lambda_sweep.csv", sweep)

for lam, auc in sweep:
    bar = "#" * int(round(40 * auc))
    print(f"lambda {lam:.1f}  auc {auc:.4f}  {bar}")

fig, ax = plt.subplots(figsize=(4.5, 3))
ax.plot([p[0] for p in sweep], [p[1] for p in sweep], marker="o")
ax.set_xlabel("lambda")
ax.set_ylabel("AUC")
ax.set_ylim(0.0, 1.02)
fig.tight_layout()
fig.savefig(out / "lambda_sweep.png", dpi=120)
print(f"\nwrote {out / 'lambda_sweep.csv'} and {out / 'lambda_sweep.png'}")
