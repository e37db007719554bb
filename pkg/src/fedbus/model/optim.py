"""Plain SGD and Adam over weight bundles."""

from __future__ import annotations

import numpy as np

from .config import TrainingSettings
from .tensors import ModelWeights, TensorBlock


class SgdOptimizer:
    def __init__(self, learning_rate: float):
        self.lr = learning_rate
        self.steps = 0

    def step(self, weights: ModelWeights, grads: ModelWeights) -> ModelWeights:
        weights.require_same_structure(grads, "gradients")
        self.steps += 1
        return weights.zip_map(grads, lambda w, g: w - self.lr * g)


class AdamOptimizer:
    """Adam with bias correction: step = lr * m_hat / (sqrt(v_hat) + eps)."""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-7):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.steps = 0
        self._m: ModelWeights | None = None
        self._v: ModelWeights | None = None

    def step(self, weights: ModelWeights, grads: ModelWeights) -> ModelWeights:
        weights.require_same_structure(grads, "gradients")
        if self._m is None:
            self._m = weights.zeros_like()
            self._v = weights.zeros_like()
        self.steps += 1
        t = self.steps
        b1, b2 = self.beta1, self.beta2
        self._m = self._m.zip_map(grads, lambda m, g: b1 * m + (1.0 - b1) * g)
        self._v = self._v.zip_map(grads, lambda v, g: b2 * v + (1.0 - b2) * g * g)
        bc1 = 1.0 - b1**t
        bc2 = 1.0 - b2**t
        new_blocks = []
        for wb, mb, vb in zip(weights.blocks, self._m.blocks, self._v.blocks):
            m_hat = mb.values / bc1
            v_hat = vb.values / bc2
            upd = wb.values - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            new_blocks.append(TensorBlock(wb.name, wb.shape, wb.dtype, upd))
        return ModelWeights(new_blocks)


def make_optimizer(settings: TrainingSettings):
    if settings.optimizer == "sgd":
        return SgdOptimizer(settings.learning_rate)
    if settings.optimizer == "adam":
        return AdamOptimizer(
            settings.learning_rate,
            settings.adam_beta1,
            settings.adam_beta2,
            settings.adam_epsilon,
        )
    raise ValueError(f"unknown optimizer {settings.optimizer!r}")
