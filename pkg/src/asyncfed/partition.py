"""Dataset partitioning across devices and data-heterogeneity metrics."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

__all__ = [
    "Shard",
    "label_histogram",
    "partition_iid",
    "partition_noniid",
    "default_subset_family",
    "HeterogeneityReport",
    "heterogeneity",
    "partition_manifest",
]


@dataclass(frozen=True)
class Shard:
    """Index set of one device's local data within the parent dataset."""

    device: int
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("shard must hold at least one sample index")
        object.__setattr__(self, "indices", idx)

    @property
    def size(self) -> int:
        return int(self.indices.size)


def label_histogram(labels, indices, n_classes: int) -> np.ndarray:
    """Per-label sample counts of one shard; sums to the shard size."""
    labels = np.asarray(labels, dtype=int)
    return np.bincount(labels[np.asarray(indices, dtype=int)], minlength=n_classes)


def partition_iid(n_samples: int, n_devices: int, rng) -> list[Shard]:
    """Uniform split without replacement.

    Every device receives ``n_samples // n_devices`` samples; the
    remainder goes one extra sample each to the lowest device ids.
    """
    if n_devices <= 0:
        raise ValueError("need a positive device count")
    if n_samples < n_devices:
        raise ValueError("dataset smaller than device count")
    perm = rng.permutation(n_samples)
    base, rem = divmod(n_samples, n_devices)
    shards, start = [], 0
    for k in range(n_devices):
        size = base + (1 if k < rem else 0)
        shards.append(Shard(k, np.sort(perm[start:start + size])))
        start += size
    return shards


def partition_noniid(labels, n_devices: int, rng,
                     shard_pool: int = 200, max_labels: int = 10) -> list[Shard]:
    """Label-skewed split: sort by label, cut into pure-label shards, deal.

    Each device receives ``cap = min(shard_pool // n_devices, max_labels)``
    single-label shards drawn at random, so it holds samples from at most
    ``cap`` distinct labels.  The shard count per label is apportioned by
    largest remainder, which keeps shard sizes equal up to rounding; a
    label whose sample count rounds to zero shards is left out of the
    distributed subset.
    """
    labels = np.asarray(labels, dtype=int)
    if n_devices < 1:
        raise ValueError("need a positive device count")
    cap = min(shard_pool // n_devices, max_labels)
    if cap < 1:
        raise ValueError(f"too many devices ({n_devices}) for a pool of {shard_pool} shards")
    n_shards = n_devices * cap
    if labels.size < n_shards:
        raise ValueError(
            f"cannot form {n_shards} label-contiguous shards from {labels.size} samples")

    present = np.unique(labels)
    counts = np.array([(labels == y).sum() for y in present], dtype=int)
    quotas = counts * n_shards / labels.size
    alloc = np.floor(quotas).astype(int)
    leftover = n_shards - alloc.sum()
    # Largest fractional remainder first, skipping labels already at capacity.
    order = np.lexsort((np.arange(present.size), -(quotas - alloc)))
    for j in order:
        if leftover == 0:
            break
        if alloc[j] < counts[j]:
            alloc[j] += 1
            leftover -= 1
    if leftover > 0:
        for j in np.argsort(-(counts - alloc)):
            if leftover == 0:
                break
            room = counts[j] - alloc[j]
            take = min(room, leftover)
            alloc[j] += take
            leftover -= take
    if leftover > 0:
        raise ValueError("cannot form enough label-contiguous shards")

    pieces = []
    for y, m in zip(present, alloc):
        if m == 0:
            continue
        members = np.flatnonzero(labels == y)
        members = rng.permutation(members)
        pieces.extend(np.sort(p) for p in np.array_split(members, m))
    deal = rng.permutation(len(pieces))
    shards = []
    for k in range(n_devices):
        chosen = deal[k * cap:(k + 1) * cap]
        shards.append(Shard(k, np.sort(np.concatenate([pieces[i] for i in chosen]))))
    return shards


def default_subset_family(n_devices: int, rng=None,
                          max_exhaustive: int = 12, n_random: int = 2000):
    """Device subsets over which the heterogeneity bounds are maximized.

    All nonempty subsets when the population is small enough to
    enumerate, otherwise every singleton plus seeded random subsets.
    """
    devices = range(n_devices)
    if n_devices <= max_exhaustive:
        family = []
        for size in range(1, n_devices + 1):
            family.extend(combinations(devices, size))
        return tuple(family)
    if rng is None:
        rng = np.random.default_rng(0)
    family = {(k,) for k in devices}
    for _ in range(n_random):
        size = int(rng.integers(2, n_devices + 1))
        family.add(tuple(sorted(rng.choice(n_devices, size=size, replace=False))))
    return tuple(sorted(family, key=lambda s: (len(s), s)))


@dataclass(frozen=True)
class HeterogeneityReport:
    """Spread between the global optimum and weighted local losses/optima.

    ``global_gap`` is the gap between the global minimum loss and the
    data-weighted sum of the per-device minima (zero for identical
    shards).  Per evaluated subset, ``optima_gaps`` compares against the
    weighted local minima and ``loss_gaps`` against the weighted local
    losses at the global optimum; the two bounds are the largest
    magnitudes over the recorded subset family.
    """

    global_gap: float
    optima_gap_bound: float
    loss_gap_bound: float
    subsets: tuple
    optima_gaps: np.ndarray
    loss_gaps: np.ndarray

    def as_dict(self) -> dict:
        return {
            "global_gap": self.global_gap,
            "optima_gap_bound": self.optima_gap_bound,
            "loss_gap_bound": self.loss_gap_bound,
            "subsets": [list(s) for s in self.subsets],
            "optima_gaps": self.optima_gaps.tolist(),
            "loss_gaps": self.loss_gaps.tolist(),
        }


def heterogeneity(task, subsets=None, subset_weights=None, rng=None) -> HeterogeneityReport:
    """Evaluate heterogeneity metrics over a family of device subsets.

    Requires closed-form optima on the task (exact for quadratics).
    Weights default to shard-size proportions within each subset; when
    given explicitly, each subset's weights must sum to one.
    """
    if not hasattr(task, "global_optimum") or not hasattr(task, "local_optimum"):
        raise TypeError("task must expose closed-form global and local optima")
    theta_star, f_star = task.global_optimum()
    local_minima = np.array([task.local_optimum(k)[1] for k in range(task.n_devices)])
    local_at_star = np.array([task.local_loss(k, theta_star) for k in range(task.n_devices)])
    sizes = task.shard_sizes.astype(float)

    gamma = f_star - float(task.data_weights @ local_minima)

    if subsets is None:
        subsets = default_subset_family(task.n_devices, rng)
    subsets = tuple(tuple(int(k) for k in s) for s in subsets)
    if subset_weights is not None and len(subset_weights) != len(subsets):
        raise ValueError("need one weight vector per subset")

    optima_gaps = np.empty(len(subsets))
    loss_gaps = np.empty(len(subsets))
    for i, subset in enumerate(subsets):
        members = np.array(subset, dtype=int)
        if subset_weights is None:
            w = sizes[members] / sizes[members].sum()
        else:
            w = np.asarray(subset_weights[i], dtype=float)
            if w.shape != members.shape:
                raise ValueError("subset weight vector has wrong length")
            if abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("subset weights must sum to 1")
        optima_gaps[i] = f_star - w @ local_minima[members]
        loss_gaps[i] = f_star - w @ local_at_star[members]

    return HeterogeneityReport(
        global_gap=gamma,
        optima_gap_bound=float(np.abs(optima_gaps).max()),
        loss_gap_bound=float(np.abs(loss_gaps).max()),
        subsets=subsets,
        optima_gaps=optima_gaps,
        loss_gaps=loss_gaps,
    )


def partition_manifest(shards, labels=None, n_classes=None) -> dict:
    """JSON-ready map: device id -> sample indices (+ label histogram)."""
    manifest = {}
    for shard in shards:
        entry = {"indices": shard.indices.tolist()}
        if labels is not None and n_classes is not None:
            entry["histogram"] = label_histogram(labels, shard.indices, n_classes).tolist()
        manifest[str(shard.device)] = entry
    return manifest
