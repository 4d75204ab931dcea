"""Local device training: proximally regularized mini-batch SGD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tasks import check_parameter_vector

__all__ = ["TrainerConfig", "local_train", "regularized_loss"]


@dataclass(frozen=True)
class TrainerConfig:
    """Local training hyperparameters.

    ``batch_size=None`` means full-shard gradients.  The learning rate
    depends on the global round only, never on the local step:

    * ``sim``:    alpha1 * kappa0 / (round - 1 + kappa0)
    * ``theory``: beta / (round + kappa)
    * ``const``:  value
    """

    local_steps: int = 1
    reg_coeff: float = 0.02
    batch_size: int | None = None
    lr_kind: str = "sim"
    lr_alpha1: float = 0.01
    lr_kappa0: float = 50.0
    lr_beta: float | None = None
    lr_kappa: float | None = None
    lr_value: float | None = None

    def __post_init__(self):
        if self.local_steps < 1:
            raise ValueError("local_steps must be >= 1")
        if self.reg_coeff < 0:
            raise ValueError("reg_coeff must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr_kind not in ("sim", "theory", "const"):
            raise ValueError(f"unknown lr_kind {self.lr_kind!r}")
        if self.lr_kind == "sim" and (self.lr_alpha1 <= 0 or self.lr_kappa0 <= 0):
            raise ValueError("sim schedule needs positive lr_alpha1 and lr_kappa0")
        if self.lr_kind == "theory" and (
                self.lr_beta is None or self.lr_kappa is None
                or self.lr_beta <= 0 or self.lr_kappa <= 0):
            raise ValueError("theory schedule needs positive lr_beta and lr_kappa")
        if self.lr_kind == "const" and (self.lr_value is None or self.lr_value <= 0):
            raise ValueError("const schedule needs a positive lr_value")

    def learning_rate(self, round_index: int, local_step: int = 0) -> float:
        if round_index < 1:
            raise ValueError("round_index starts at 1")
        if self.lr_kind == "sim":
            rate = self.lr_alpha1 * self.lr_kappa0 / (round_index - 1 + self.lr_kappa0)
        elif self.lr_kind == "theory":
            rate = self.lr_beta / (round_index + self.lr_kappa)
        else:
            rate = self.lr_value
        if rate <= 0:
            raise ValueError("learning rate must be positive")
        return float(rate)


def local_train(task, device: int, anchor, config: TrainerConfig,
                round_index: int, rng) -> np.ndarray:
    """Run the local SGD steps from ``anchor`` and return the model delta.

    Each step descends the device loss plus the proximal penalty
    ``reg_coeff/2 * ||theta - anchor||^2``; the returned update is the
    final iterate minus the anchor.  Mini-batches are drawn uniformly
    without replacement, reshuffled every step.
    """
    anchor = check_parameter_vector(anchor, task.dim)
    shard_size = int(task.shard_sizes[device])
    if config.batch_size is not None and config.batch_size > shard_size:
        raise ValueError(
            f"batch_size {config.batch_size} exceeds shard size {shard_size}")
    theta = anchor.copy()
    for step in range(config.local_steps):
        rate = config.learning_rate(round_index, step)
        batch = None
        if config.batch_size is not None and config.batch_size < shard_size:
            batch = rng.choice(shard_size, size=config.batch_size, replace=False)
        grad = task.local_gradient(device, theta, batch)
        grad = grad + config.reg_coeff * (theta - anchor)
        theta = theta - rate * grad
    update = theta - anchor
    if not np.all(np.isfinite(update)):
        raise FloatingPointError("local training diverged to non-finite values")
    return update


def regularized_loss(task, device: int, theta, anchor, reg_coeff: float) -> float:
    """Device loss plus the proximal penalty around the anchor model."""
    theta = check_parameter_vector(theta, task.dim)
    anchor = check_parameter_vector(anchor, task.dim)
    diff = theta - anchor
    return task.local_loss(device, theta) + 0.5 * reg_coeff * float(diff @ diff)
