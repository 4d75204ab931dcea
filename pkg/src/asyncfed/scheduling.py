"""Device scheduling policies for the periodic uplink.

Five policies select up to R of the ready devices each round:

* ``random``   uniform subset
* ``bc``       best channels (highest capacity)
* ``bcbn2``    capacity pre-filter, then largest update norms
* ``age``      capacity pre-filter, then most stale devices
* ``proposed`` capacity pre-filter, then the subset whose pooled label
               histogram has the smallest label variance

All ties break toward the smallest device id so runs are reproducible.
An exhaustive oracle over small candidate pools backs the tests of the
label-variance policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "ScheduleContext",
    "label_variance",
    "schedule",
    "update_staleness",
    "oracle_min_label_variance",
    "capacity_prefilter",
    "OracleSizeError",
    "POLICIES",
    "EXHAUSTIVE_SEARCH_LIMIT",
]

POLICIES = ("random", "bc", "bcbn2", "age", "proposed")

# Above this many candidate subsets the label-variance policy falls back
# to greedy selection plus one swap-improvement pass.
EXHAUSTIVE_SEARCH_LIMIT = 200_000


class OracleSizeError(ValueError):
    """Raised when the exhaustive oracle would enumerate too many subsets."""


@dataclass(frozen=True)
class ScheduleContext:
    """Everything a policy may look at when picking devices."""

    ready: tuple
    capacities: Mapping[int, float]
    max_scheduled: int
    population: int
    histograms: Mapping[int, np.ndarray] | None = None
    update_norms: Mapping[int, float] | None = None
    staleness: Mapping[int, int] | None = None

    def __post_init__(self):
        ready = tuple(sorted(int(k) for k in self.ready))
        if self.max_scheduled < 1:
            raise ValueError("max_scheduled must be >= 1")
        if any(k < 0 or k >= self.population for k in ready):
            raise ValueError("ready devices outside the population")
        object.__setattr__(self, "ready", ready)


def label_variance(histograms) -> float:
    """Squared deviation of the pooled label counts from their mean."""
    histograms = [np.asarray(h, dtype=float) for h in histograms]
    if not histograms:
        raise ValueError("need at least one histogram")
    pooled = np.sum(histograms, axis=0)
    return float(((pooled - pooled.mean()) ** 2).sum())


def _top_by(ids, score, count: int) -> list[int]:
    return sorted(ids, key=lambda k: (-score[k], k))[:count]


def capacity_prefilter(ctx: ScheduleContext) -> list[int]:
    """The floor(N/2) ready devices with the best channels."""
    keep = min(ctx.population // 2, len(ctx.ready))
    return _top_by(ctx.ready, ctx.capacities, keep)


def _greedy_min_variance(candidates: Sequence[int], size: int,
                         histograms: Mapping[int, np.ndarray]) -> list[int]:
    chosen: list[int] = []
    pooled = None
    remaining = list(candidates)
    for _ in range(size):
        best, best_score = None, None
        for k in remaining:
            h = np.asarray(histograms[k], dtype=float)
            p = h if pooled is None else pooled + h
            score = float(((p - p.mean()) ** 2).sum())
            if best_score is None or score < best_score:
                best, best_score = k, score
        chosen.append(best)
        remaining.remove(best)
        h = np.asarray(histograms[best], dtype=float)
        pooled = h if pooled is None else pooled + h
    # One pass of pairwise swaps, first strict improvement taken.
    for s in sorted(chosen):
        for u in sorted(set(candidates) - set(chosen)):
            trial = [u if k == s else k for k in chosen]
            if label_variance([histograms[k] for k in trial]) < \
                    label_variance([histograms[k] for k in chosen]):
                chosen = trial
                break
    return sorted(chosen)


def _exhaustive_min_variance(candidates: Sequence[int], size: int,
                             histograms: Mapping[int, np.ndarray]) -> tuple[int, ...]:
    best, best_score = None, None
    for subset in combinations(sorted(candidates), size):
        score = label_variance([histograms[k] for k in subset])
        if best_score is None or score < best_score:
            best, best_score = subset, score
    return best


def schedule(policy: str, ctx: ScheduleContext, rng) -> tuple[int, ...]:
    """Pick the scheduled subset for one round; empty if nobody is ready."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    ready = list(ctx.ready)
    if not ready:
        return ()
    size = min(ctx.max_scheduled, len(ready))

    if policy == "random":
        picked = rng.choice(len(ready), size=size, replace=False)
        return tuple(sorted(ready[i] for i in picked))

    if policy == "bc":
        return tuple(sorted(_top_by(ready, ctx.capacities, size)))

    pool = capacity_prefilter(ctx)
    size = min(size, len(pool))

    if policy == "bcbn2":
        if ctx.update_norms is None:
            raise ValueError("bcbn2 policy needs update norms")
        return tuple(sorted(_top_by(pool, ctx.update_norms, size)))

    if policy == "age":
        if ctx.staleness is None:
            raise ValueError("age policy needs staleness counters")
        return tuple(sorted(_top_by(pool, ctx.staleness, size)))

    if ctx.histograms is None:
        raise ValueError("proposed policy needs label histograms")
    if math.comb(len(pool), size) <= EXHAUSTIVE_SEARCH_LIMIT:
        return tuple(_exhaustive_min_variance(pool, size, ctx.histograms))
    return tuple(_greedy_min_variance(pool, size, ctx.histograms))


def update_staleness(counters: Mapping[int, int], scheduled) -> dict[int, int]:
    """Advance the per-device count of rounds missed since the start."""
    scheduled = set(scheduled)
    return {k: c + (0 if k in scheduled else 1) for k, c in counters.items()}


def oracle_min_label_variance(histograms: Mapping[int, np.ndarray], size: int,
                              limit: int = 10 ** 6) -> tuple[int, ...]:
    """Exact smallest-label-variance subset by full enumeration.

    Ties break to the lexicographically smallest id sequence.  Guards
    against combinatorial blow-ups; intended for testing the policy.
    """
    ids = sorted(histograms)
    if not 1 <= size <= len(ids):
        raise ValueError("subset size out of range")
    if math.comb(len(ids), size) > limit:
        raise OracleSizeError(
            f"C({len(ids)}, {size}) exceeds the enumeration limit {limit}")
    return _exhaustive_min_variance(ids, size, histograms)
