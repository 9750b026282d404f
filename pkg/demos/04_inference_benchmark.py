"""Time the combined score against the iterative latent-search baseline.

The combined score needs one encoder pass, one generator pass, and two
critic passes per item. The baseline instead optimizes a latent vector
with Adam for hundreds of iterations per item. Both are timed on the
same checkpoint and hardware.

    python3 demos/04_inference_benchmark.py
"""

from pathlib import Path

from ganad.archspec import ArchitectureConfig
from ganad.data import make_synthetic
from ganad.evaluation import bench_inference
from ganad.scoring import ScoreWeights, anogan_score, anomaly_score
from ganad.training import TrainConfig, train

out = Path("runs/demo_bench")

splits = make_synthetic(n_normal=400, n_anomalous=80, seed=0)
arch = ArchitectureConfig.for_dataset("synthetic")
result = train(splits, arch, TrainConfig(epochs=3), out)
bundle = result.bundle.eval_mode()

counts = bundle.parameter_counts()
print(f"encoder {counts['encoder']:,} params  generator {counts['generator']:,}  critic {counts['critic']:,}\n")

w = ScoreWeights.for_dataset("synthetic")
items = splits.test[:4]

scorers = [
    ("combined score", lambda it: anomaly_score(it.pixels, bundle, w)),
    ("latent search x100", lambda it: anogan_score(it.pixels, bundle.generator, bundle.critic, iterations=100, w=w)),
    ("latent search x500", lambda it: anogan_score(it.pixels, bundle.generator, bundle.critic, iterations=500, w=w)),
]
rows = bench_inference(scorers, items, repetitions=3)

print(f"{'scorer':<22}{'ms/item':>12}{'slowdown':>12}")
base = rows[0]["median_ms_per_item"]
for row in rows:
    ms = row["median_ms_per_item"]
    if ms is None:
        print(f"{row['name']:<22}{'failed':>12}  {row['error']}")
    else:
        print(f"{row['name']:<22}{ms:>12.2f}{ms / base:>11.0f}x")
