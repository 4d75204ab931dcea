"""Fading channels and the equal-rate symbol split.

Draws Rayleigh channel realizations at a 13 dB mean received SNR, then
splits one symbol block so every scheduled device gets the same bit
budget: weaker channels receive more symbols.  The resulting budgets
determine how aggressively each device must sparsify.
"""

import numpy as np

from asyncfed import allocate_symbols, draw_channel, max_sparsity

rng = np.random.default_rng(1)

draws = [draw_channel(rng, snr_db=13.0) for _ in range(100_000)]
capacities = np.array([d.capacity for d in draws])
print("Rayleigh capacity at 13 dB mean SNR over 1e5 draws:")
print(f"  mean {capacities.mean():.3f} bits/symbol, "
      f"median {np.median(capacities):.3f}, "
      f"5th pct {np.percentile(capacities, 5):.3f}, "
      f"95th pct {np.percentile(capacities, 95):.3f}")

scheduled = [draw_channel(rng, snr_db=13.0) for _ in range(4)]
caps = [d.capacity for d in scheduled]
block = 2000
alloc = allocate_symbols(caps, block)
print(f"\nsplitting a {block}-symbol block across 4 scheduled devices:")
print(f"{'device':>6} {'C (b/sym)':>10} {'symbols':>8} {'budget (bits)':>14} "
      f"{'retained of 180':>16}")
for k, (cap, n_k) in enumerate(zip(caps, alloc.counts)):
    budget = n_k * cap
    r = max_sparsity(180, 4, budget)
    print(f"{k:>6} {cap:>10.3f} {n_k:>8} {budget:>14.1f} {r:>16}")
products = alloc.products(caps)
print(f"\nbudget spread: {products.max() - products.min():.3f} bits "
      f"(at most one symbol's worth, {max(caps):.3f})")
