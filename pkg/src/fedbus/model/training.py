"""Local mini-batch training with deadline and cancellation checks."""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import ModelConfig, TrainingSettings
from .network import GradientModifier, loss_and_grad
from .optim import make_optimizer
from .tensors import ModelWeights


class TrainingFailure(RuntimeError):
    """Raised when local training cannot produce a usable model."""


@dataclass
class TrainResult:
    weights: ModelWeights
    epoch_losses: list[float] = field(default_factory=list)
    completed_epochs: int = 0
    steps: int = 0
    cancelled: bool = False


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary parts (round numbers, client ids...)."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def train_local(
    config: ModelConfig,
    weights: ModelWeights,
    dataset,
    settings: TrainingSettings,
    modifier: GradientModifier | None = None,
    deadline: float | None = None,
    should_cancel: Callable[[], bool] | None = None,
) -> TrainResult:
    """Run up to ``settings.epochs`` shuffled mini-batch passes.

    ``deadline`` is a ``time.monotonic()`` instant; once passed, training
    stops between batches and the current weights are returned with
    ``completed_epochs`` reflecting only full passes. ``should_cancel`` is
    polled at the same batch boundaries and marks the result cancelled.
    """
    settings.validate()
    x = np.asarray(dataset.features, dtype=np.float64)
    y = np.asarray(dataset.labels, dtype=np.float64).reshape(-1)
    n = x.shape[0]
    if n == 0:
        raise TrainingFailure("empty training dataset")

    current = weights if weights.dtype == "f64" else weights.astype("f64")
    optimizer = make_optimizer(settings)
    rng = np.random.default_rng(settings.rng_seed)
    batch_size = min(settings.batch_size, n)
    result = TrainResult(weights=current)

    for _ in range(settings.epochs):
        order = rng.permutation(n)
        epoch_loss_sum = 0.0
        seen = 0
        for start in range(0, n, batch_size):
            if should_cancel is not None and should_cancel():
                result.cancelled = True
                result.weights = current
                return result
            if deadline is not None and time.monotonic() >= deadline:
                result.weights = current
                return result
            idx = order[start : start + batch_size]
            loss, grads = loss_and_grad(config, current, x[idx], y[idx], modifier, rng)
            if not math.isfinite(loss):
                raise TrainingFailure(f"non-finite training loss at step {result.steps + 1}")
            current = optimizer.step(current, grads)
            result.steps += 1
            epoch_loss_sum += loss * len(idx)
            seen += len(idx)
        result.completed_epochs += 1
        result.epoch_losses.append(epoch_loss_sum / seen)

    result.weights = current
    return result
