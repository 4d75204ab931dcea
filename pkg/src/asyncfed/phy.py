"""Uplink physical layer: fading channels, symbol allocation, compression.

The wire format is bit-exact and most-significant-bit first:

    [index rank][32-bit norm][per retained element: 1 sign bit + level bits]

The retained index set is serialized as its lexicographic rank among all
r-subsets of {0..d-1} (combinadic encoding) in ``ceil(log2 C(d, r))``
bits, computed with exact integer arithmetic.  The norm is an IEEE-754
single; each element carries one sign bit (1 = negative) plus
``ceil(log2(levels + 1))`` bits for its quantization level.  The
dimension, retained count and level count travel out of band in round
metadata.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "ChannelDraw",
    "draw_channel",
    "SymbolAllocation",
    "allocate_symbols",
    "max_sparsity",
    "sparsify",
    "CompressedUpdate",
    "quantize",
    "reconstruct",
    "BitString",
    "encode",
    "decode",
    "encoded_bit_length",
    "index_bit_length",
    "level_bit_length",
    "subset_rank",
    "subset_unrank",
]

NORM_BITS = 32


@dataclass(frozen=True)
class ChannelDraw:
    """One uplink realization: gains, power, noise, derived capacity."""

    large_scale: float
    fading: complex
    power: float
    noise_power: float

    def __post_init__(self):
        if self.noise_power <= 0:
            raise ValueError("noise power must be positive")
        if self.power < 0 or self.large_scale < 0:
            raise ValueError("power and large-scale gain must be nonnegative")

    @property
    def capacity(self) -> float:
        """Bits per symbol of the link."""
        snr = self.power * self.large_scale * abs(self.fading) ** 2 / self.noise_power
        return float(np.log2(1.0 + snr))


def draw_channel(rng, snr_db: float | None = None, *, power: float | None = None,
                 large_scale: float | None = None, noise_power: float | None = None,
                 fading: str = "rayleigh") -> ChannelDraw:
    """Draw one channel realization.

    Either give ``snr_db`` (power control sets the mean received SNR to
    that value, with unit large-scale gain and noise) or the explicit
    ``power``, ``large_scale`` and ``noise_power`` triple.  Rayleigh
    fading draws a unit-variance complex-normal coefficient, so the
    power gain ``|h|^2`` is exponential with unit mean; ``fading="none"``
    fixes ``h = 1``.
    """
    if snr_db is not None:
        if power is not None or large_scale is not None or noise_power is not None:
            raise ValueError("give snr_db or the explicit triple, not both")
        power, large_scale, noise_power = 10.0 ** (snr_db / 10.0), 1.0, 1.0
    elif power is None or large_scale is None or noise_power is None:
        raise ValueError("need snr_db or all of power, large_scale, noise_power")
    if fading == "rayleigh":
        h = complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2.0)
    elif fading == "none":
        h = 1.0 + 0.0j
    else:
        raise ValueError(f"unknown fading model {fading!r}")
    return ChannelDraw(large_scale, h, power, noise_power)


@dataclass(frozen=True)
class SymbolAllocation:
    """Integer symbol counts per scheduled device, summing to the block."""

    total: int
    counts: np.ndarray

    def products(self, capacities) -> np.ndarray:
        return self.counts * np.asarray(capacities, dtype=float)


def allocate_symbols(capacities, total: int) -> SymbolAllocation:
    """Split a symbol block so the per-device bit budgets are equalized.

    The real-valued solution gives every device the same ``n_k * C_k``
    product (better channels get fewer symbols).  It is integerized by
    flooring and then handing leftover symbols one at a time to the
    device with the smallest current product, which keeps the largest
    product gap below the largest capacity.
    """
    caps = np.asarray(capacities, dtype=float)
    if caps.ndim != 1 or caps.size == 0:
        raise ValueError("need at least one capacity")
    if np.any(caps <= 0):
        raise ValueError("zero-capacity link cannot be scheduled")
    if total < caps.size:
        raise ValueError("fewer symbols than scheduled devices")
    inverse = 1.0 / caps
    shares = total * inverse / inverse.sum()
    counts = np.floor(shares).astype(int)
    for _ in range(total - int(counts.sum())):
        counts[np.argmin(counts * caps)] += 1
    return SymbolAllocation(total=int(total), counts=counts)


def level_bit_length(levels: int) -> int:
    """Bits per quantized element code, excluding the sign bit."""
    if levels < 1:
        raise ValueError("need at least one quantization level")
    return int(levels).bit_length()


def index_bit_length(dim: int, retained: int) -> int:
    """ceil(log2 C(dim, retained)), exact."""
    return (math.comb(dim, retained) - 1).bit_length()


def encoded_bit_length(dim: int, retained: int, levels: int) -> int:
    """Exact wire length of a compressed update."""
    return index_bit_length(dim, retained) + NORM_BITS + retained * (level_bit_length(levels) + 1)


@lru_cache(maxsize=64)
def _log2_binomials(dim: int) -> np.ndarray:
    """log2 C(dim, r) for r = 0..dim via log-gamma sums."""
    lg = np.array([math.lgamma(i + 1.0) for i in range(dim + 1)])
    r = np.arange(dim + 1)
    return (lg[dim] - lg[r] - lg[dim - r]) / math.log(2.0)


def max_sparsity(dim: int, levels: int, budget_bits: float) -> int:
    """Largest retained count whose transmission cost fits the budget.

    The cost of retaining r of dim coordinates is the real-valued
    ``log2 C(dim, r) + 32 + r * (level_bits + 1)``; serialization rounds
    the index term up to whole bits, so a fractional budget can fall
    short of the wire length by under one bit.  Returns 0 when nothing
    fits (the 32-bit norm header alone may exceed the budget).
    """
    if budget_bits < 0:
        raise ValueError("budget must be nonnegative")
    per_element = level_bit_length(levels) + 1
    costs = _log2_binomials(dim) + NORM_BITS + np.arange(dim + 1) * per_element
    feasible = np.flatnonzero(costs <= budget_bits + 1e-9)
    return int(feasible.max()) if feasible.size else 0


def sparsify(update, retained: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Keep a uniformly random subset of coordinates, zero the rest."""
    update = np.asarray(update, dtype=float)
    dim = update.size
    if not 0 <= retained <= dim:
        raise ValueError("retained count out of range")
    indices = np.sort(rng.choice(dim, size=retained, replace=False))
    sparse = np.zeros(dim)
    sparse[indices] = update[indices]
    return sparse, indices


@dataclass(frozen=True, eq=False)
class CompressedUpdate:
    """Wire representation of a sparsified, randomly quantized update.

    ``norm`` is the 32-bit-rounded Euclidean norm of the sparsified
    vector; each retained coordinate is stored as a sign and a level in
    {0..levels}, reconstructing to ``norm * sign * level / levels``.
    """

    dim: int
    levels: int
    indices: np.ndarray
    signs: np.ndarray
    codes: np.ndarray
    norm: float

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        signs = np.asarray(self.signs, dtype=np.int8)
        codes = np.asarray(self.codes, dtype=int)
        if not (idx.shape == signs.shape == codes.shape):
            raise ValueError("indices, signs and codes must have equal length")
        if idx.size:
            if idx.min() < 0 or idx.max() >= self.dim or np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be sorted, unique and in range")
            if np.any((signs != 1) & (signs != -1)):
                raise ValueError("signs must be +/-1")
            if codes.min() < 0 or codes.max() > self.levels:
                raise ValueError("codes out of range")
        if not (np.isfinite(self.norm) and self.norm >= 0):
            raise ValueError("norm must be finite and nonnegative")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "norm", float(np.float32(self.norm)))

    @property
    def retained(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CompressedUpdate)
            and self.dim == other.dim
            and self.levels == other.levels
            and self.norm == other.norm
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.signs, other.signs)
            and np.array_equal(self.codes, other.codes)
        )


def quantize(sparse, indices, levels: int, rng, bias: float = 0.0) -> CompressedUpdate:
    """Random quantization of the retained coordinates.

    Each retained value x maps to level z or z+1 of the vector norm,
    where z = floor(levels * |x| / norm) and the upper level is chosen
    with probability ``levels * |x| / norm - z``.  The law uses the same
    32-bit-rounded norm that the receiver will see, which makes the
    reconstruction exactly unbiased.  A zero vector quantizes to all-zero
    levels.

    ``bias`` shifts the rounding probability and exists only as a fault
    injection hook for the verification harness's negative control.
    """
    if levels < 1:
        raise ValueError("need at least one quantization level")
    sparse = np.asarray(sparse, dtype=float)
    indices = np.asarray(indices, dtype=int)
    norm = float(np.float32(np.linalg.norm(sparse)))
    values = sparse[indices]
    if norm == 0.0:
        codes = np.zeros(indices.size, dtype=int)
        signs = np.ones(indices.size, dtype=np.int8)
    else:
        scaled = levels * np.abs(values) / norm
        floors = np.clip(np.floor(scaled), 0, levels)
        frac = np.clip(scaled - floors, 0.0, 1.0)
        if bias:
            frac = np.clip(frac + bias, 0.0, 1.0)
        up = rng.random(indices.size) < frac
        codes = np.minimum(floors.astype(int) + up, levels)
        signs = np.where(values < 0, -1, 1).astype(np.int8)
    return CompressedUpdate(dim=sparse.size, levels=levels, indices=indices,
                            signs=signs, codes=codes, norm=norm)


def reconstruct(update: CompressedUpdate) -> np.ndarray:
    """Dense vector with quantized values at the retained indices."""
    out = np.zeros(update.dim)
    if update.retained:
        out[update.indices] = update.norm * update.signs * update.codes / update.levels
    return out


def subset_rank(indices, dim: int) -> int:
    """Lexicographic rank of a sorted index subset of {0..dim-1}."""
    rank, prev = 0, -1
    r = len(indices)
    for i, v in enumerate(indices):
        for c in range(prev + 1, v):
            rank += math.comb(dim - 1 - c, r - 1 - i)
        prev = v
    return rank


def subset_unrank(rank: int, dim: int, retained: int) -> np.ndarray:
    """Inverse of ``subset_rank``."""
    if not 0 <= rank < math.comb(dim, retained):
        raise ValueError("subset rank out of range")
    out, c = [], 0
    remaining = rank
    for i in range(retained):
        while True:
            below = math.comb(dim - 1 - c, retained - 1 - i)
            if remaining < below:
                out.append(c)
                c += 1
                break
            remaining -= below
            c += 1
    return np.array(out, dtype=int)


@dataclass(frozen=True)
class BitString:
    """Bit-exact message: packed bytes plus the exact bit length."""

    data: bytes
    length: int

    def __post_init__(self):
        if len(self.data) != (self.length + 7) // 8:
            raise ValueError("byte buffer does not match bit length")


def encode(update: CompressedUpdate) -> BitString:
    """Serialize a compressed update, MSB first."""
    acc, nbits = 0, 0

    def put(value: int, width: int):
        nonlocal acc, nbits
        acc = (acc << width) | value
        nbits += width

    put(subset_rank(update.indices.tolist(), update.dim),
        index_bit_length(update.dim, update.retained))
    put(int.from_bytes(struct.pack(">f", update.norm), "big"), NORM_BITS)
    width = level_bit_length(update.levels)
    for sign, code in zip(update.signs.tolist(), update.codes.tolist()):
        put(1 if sign < 0 else 0, 1)
        put(code, width)
    nbytes = (nbits + 7) // 8
    return BitString(data=(acc << (8 * nbytes - nbits)).to_bytes(nbytes, "big"),
                     length=nbits)


def decode(bits: BitString, dim: int, levels: int, retained: int) -> CompressedUpdate:
    """Invert ``encode`` given the out-of-band dimension, levels and count."""
    expected = encoded_bit_length(dim, retained, levels)
    if bits.length != expected:
        raise ValueError(f"message is {bits.length} bits, expected {expected}")
    acc = int.from_bytes(bits.data, "big") >> (8 * len(bits.data) - bits.length)
    cursor = bits.length

    def take(width: int) -> int:
        nonlocal cursor
        cursor -= width
        return (acc >> cursor) & ((1 << width) - 1)

    rank = take(index_bit_length(dim, retained))
    indices = subset_unrank(rank, dim, retained)
    norm = struct.unpack(">f", take(NORM_BITS).to_bytes(4, "big"))[0]
    if not np.isfinite(norm) or norm < 0:
        raise ValueError("malformed norm field")
    width = level_bit_length(levels)
    signs = np.empty(retained, dtype=np.int8)
    codes = np.empty(retained, dtype=int)
    for i in range(retained):
        signs[i] = -1 if take(1) else 1
        codes[i] = take(width)
    if retained and codes.max() > levels:
        raise ValueError("quantization code out of range")
    return CompressedUpdate(dim=dim, levels=levels, indices=indices,
                            signs=signs, codes=codes, norm=float(norm))
