"""Walk one model update through the uplink compression pipeline.

Shows the three stages a scheduled device applies before transmitting:
random sparsification to the budgeted coordinate count, random
quantization of the survivors against the vector norm, and the bit-exact
wire encoding whose length matches the budget formula.
"""

import math

import numpy as np

from asyncfed import (decode, encode, encoded_bit_length, max_sparsity,
                      quantize, reconstruct, sparsify)

rng = np.random.default_rng(0)

dim, levels = 24, 4
update = rng.normal(0.0, 1.0, size=dim)
budget_bits = 120.0  # what the round's symbol allocation granted this device

retained = max_sparsity(dim, levels, budget_bits)
print(f"update dimension {dim}, budget {budget_bits} bits, "
      f"{levels}-level quantizer")
print(f"-> largest affordable coordinate count: {retained}")
cost = math.log2(math.comb(dim, retained)) + 32 + retained * 4
print(f"   real-valued cost at r={retained}: {cost:.2f} bits")

sparse, kept = sparsify(update, retained, rng)
print(f"\nkept indices: {kept.tolist()}")
print(f"sparsified norm {np.linalg.norm(sparse):.4f} "
      f"(full norm {np.linalg.norm(update):.4f})")

compressed = quantize(sparse, kept, levels, rng)
print(f"levels: {compressed.codes.tolist()}")
print(f"signs:  {compressed.signs.tolist()}")

message = encode(compressed)
print(f"\nwire message: {message.length} bits "
      f"({encoded_bit_length(dim, retained, levels)} by the length formula)")
print(f"payload bytes: {message.data.hex()}")

received = decode(message, dim, levels, retained)
assert received == compressed
estimate = reconstruct(received)
err = np.linalg.norm(estimate - sparse)
print(f"\nround trip exact: {received == compressed}")
print(f"reconstruction error vs sparsified update: {err:.4f}")
print(f"reconstruction error vs full update:       "
      f"{np.linalg.norm(estimate - update):.4f}")
