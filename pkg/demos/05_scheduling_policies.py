"""Compare the five scheduling policies on a label-skewed classifier.

Each policy picks up to R of the ready devices per round.  The
channel-and-data-aware policy first keeps the better half of the ready
set by capacity, then selects the subset whose pooled label histogram is
most balanced, which pays off when devices hold skewed label slices.
"""

from dataclasses import replace

import numpy as np

from asyncfed import SimConfig, run

base = SimConfig.from_dict({
    "mode": "async_periodic",
    "seed": 0,
    "n_devices": 20,
    "max_scheduled": 4,
    "t_min": 1.0, "t_max": 4.0, "period": 1.0,
    "horizon_ticks": 150,
    "symbols_per_round": 400,
    "local_steps": 5,
    "batch_size": 20,
    "lr_alpha1": 0.05,
    "task": {"kind": "classification", "classes": 20, "features": 8,
             "train_size": 4000, "test_size": 1000, "partition": "noniid",
             "cluster_spread": 2.0, "noise": 1.5},
})

print("final-quarter mean test accuracy, 3 seeds each:")
print(f"{'policy':>10} {'seed 0':>8} {'seed 1':>8} {'seed 2':>8} {'mean':>8}")
for policy in ("random", "bc", "bcbn2", "age", "proposed"):
    accs = []
    for seed in range(3):
        cfg = replace(base, policy=policy, seed=100 + seed, task_seed=7)
        records = run(cfg)
        quarter = len(records) // 4
        accs.append(float(np.mean([r.accuracy for r in records[-quarter:]])))
    row = " ".join(f"{a:8.4f}" for a in accs)
    print(f"{policy:>10} {row} {np.mean(accs):8.4f}")
