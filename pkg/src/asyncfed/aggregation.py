"""Server-side aggregation rules and update-age bookkeeping."""

from __future__ import annotations

import numpy as np

__all__ = [
    "AgeTracker",
    "age_weights",
    "aggregate_async",
    "aggregate_sync",
    "fedasync_step",
]


class AgeTracker:
    """Tracks, per device, the round at which it last got a fresh model.

    Every device receives the initial broadcast, so the refresh round
    starts at 1 for all.  A device's age at round t is the number of
    rounds elapsed since its model version was current.
    """

    def __init__(self, n_devices: int):
        if n_devices < 1:
            raise ValueError("need at least one device")
        self.refresh_round = np.ones(n_devices, dtype=int)

    @property
    def n_devices(self) -> int:
        return self.refresh_round.size

    def anchor_version(self, device: int) -> int:
        return int(self.refresh_round[device])

    def ages(self, round_index: int) -> np.ndarray:
        ages = round_index - self.refresh_round
        if np.any(ages < 0):
            raise ValueError("round index precedes a recorded refresh")
        return ages

    def record_broadcast(self, receivers, round_index: int):
        """Mark devices that received the model produced in this round."""
        receivers = np.asarray(list(receivers), dtype=int)
        if receivers.size:
            self.refresh_round[receivers] = round_index + 1


def age_weights(sizes, ages, decay: float) -> np.ndarray:
    """Aggregation weights proportional to shard size times decay**age.

    ``decay`` (the ``gamma`` config key) below one favors fresh updates,
    above one favors stale ones, and exactly one recovers plain
    data-proportional weighting.  Weights depend only on age differences.
    """
    if decay <= 0:
        raise ValueError("decay must be positive")
    sizes = np.asarray(sizes, dtype=float)
    ages = np.asarray(ages, dtype=float)
    if sizes.size == 0:
        raise ValueError("need at least one scheduled device")
    raw = sizes * decay ** (ages - ages.min())  # shift for overflow safety
    return raw / raw.sum()


def aggregate_async(bases, updates, weights) -> np.ndarray:
    """Weighted average of per-device base models plus their updates."""
    bases = np.asarray(bases, dtype=float)
    updates = np.asarray(updates, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if bases.shape != updates.shape or weights.shape != (bases.shape[0],):
        raise ValueError("bases, updates and weights must align")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    return weights @ (bases + updates)


def aggregate_sync(theta, updates, sizes) -> np.ndarray:
    """Add the data-proportional average of the received updates."""
    theta = np.asarray(theta, dtype=float)
    updates = np.asarray(updates, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if updates.ndim != 2 or updates.shape[1] != theta.size:
        raise ValueError("updates must be (m, dim)")
    if sizes.shape != (updates.shape[0],) or sizes.sum() <= 0:
        raise ValueError("need positive shard sizes, one per update")
    return theta + (sizes / sizes.sum()) @ updates


def fedasync_step(theta, incoming, mix: float) -> np.ndarray:
    """Mix one arriving device result into the global model.

    ``incoming`` is either the device's post-training model or its raw
    update, per the caller's configured interpretation.
    """
    if not 0 < mix <= 1:
        raise ValueError("mixing factor must be in (0, 1]")
    theta = np.asarray(theta, dtype=float)
    incoming = np.asarray(incoming, dtype=float)
    if theta.shape != incoming.shape:
        raise ValueError("dimension mismatch")
    return (1.0 - mix) * theta + mix * incoming
