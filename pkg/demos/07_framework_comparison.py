"""Three training protocols under one communication budget.

Synchronous rounds wait for the slowest device and get the whole
accumulated symbol budget; the periodic protocol aggregates every period
from whoever is ready; the fully asynchronous baseline folds in every
completion immediately with a mixing filter.  All three consume the same
symbols per unit wall-clock time, so their loss traces are comparable.
"""

from dataclasses import replace

import numpy as np

from asyncfed import SimConfig, build_task, quadratic_optimum, run, run_summary

base = SimConfig.from_dict({
    "mode": "async_periodic",
    "policy": "random",
    "seed": 9,
    "n_devices": 12,
    "max_scheduled": 3,
    "t_min": 0.5, "t_max": 4.0, "period": 1.0,
    "horizon_ticks": 160,
    "symbols_per_round": 900,
    "lr_alpha1": 0.08,
    "alpha_filter": 0.4,
    "task": {"kind": "quadratic", "dim": 10, "center_spread": 0.3,
             "curvature_range": [0.5, 2.0], "shard_size": 6},
})
_, f_star = quadratic_optimum(build_task(base))

print(f"horizon {base.wallclock_horizon} time units, nominal rate "
      f"{base.symbols_per_round / base.tick_period:.0f} symbols/unit\n")
print(f"{'mode':>16} {'rounds':>7} {'symbols':>9} {'rate':>7} {'final gap':>11}")
for mode in ("sync_fedavg", "async_periodic", "fedasync"):
    cfg = replace(base, mode=mode)
    records = run(cfg)
    summary = run_summary(cfg, records)
    gaps = [r.loss - f_star for r in records]
    print(f"{mode:>16} {len(records):>7} {summary['cum_symbols']:>9} "
          f"{summary['symbol_rate']:>7.1f} {gaps[-1]:>11.5f}")

print("\ngap traces at matched wall-clock times:")
times = [20.0, 60.0, 120.0, 160.0]
header = " ".join(f"t={t:<8.0f}" for t in times)
print(f"{'mode':>16} {header}")
for mode in ("sync_fedavg", "async_periodic", "fedasync"):
    records = run(replace(base, mode=mode))
    row = []
    for t in times:
        done = [r for r in records if r.wallclock <= t + 1e-9]
        row.append(done[-1].loss - f_star if done else float("nan"))
    print(f"{mode:>16} " + " ".join(f"{g:<10.5f}" for g in row))
