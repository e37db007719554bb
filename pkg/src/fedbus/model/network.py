"""Dense network math: init, forward pass, and backpropagated gradients.

All math runs in float64. Probabilities fed into the cross-entropy are
clamped to [PROB_EPS, 1 - PROB_EPS]; the analytic gradient is zeroed where
the clamp engages so it stays the true gradient of the computed loss.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .config import ModelConfig
from .tensors import ModelWeights, TensorBlock

PROB_EPS = 1e-7

# modifier(weights, grads) -> adjusted grads, same block structure
GradientModifier = Callable[[ModelWeights, ModelWeights], ModelWeights]


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def layer_dims(config: ModelConfig) -> list[tuple[int, int]]:
    """(fan_in, fan_out) per trainable layer, output layer last."""
    dims = []
    fan_in = config.input_dim
    for layer in config.layers:
        dims.append((fan_in, layer.units))
        fan_in = layer.units
    dims.append((fan_in, 1))
    return dims


def block_names(config: ModelConfig) -> list[str]:
    names = []
    for i in range(len(config.layers)):
        names += [f"layer{i}/W", f"layer{i}/b"]
    names += ["output/W", "output/b"]
    return names


def build_model(config: ModelConfig, seed: int) -> ModelWeights:
    """Glorot-uniform weights, zero biases; deterministic for a given seed."""
    config.validate()
    rng = np.random.default_rng(seed)
    blocks = []
    dims = layer_dims(config)
    names = block_names(config)
    for (fan_in, fan_out), w_name, b_name in zip(dims, names[0::2], names[1::2]):
        limit = glorot_limit(fan_in, fan_out)
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        blocks.append(TensorBlock(w_name, (fan_in, fan_out), "f64", w))
        blocks.append(TensorBlock(b_name, (fan_out,), "f64", np.zeros(fan_out)))
    return ModelWeights(blocks)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return _sigmoid(z)
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _activate_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "linear":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_batch(config: ModelConfig, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != config.input_dim:
        raise ValueError(
            f"batch shape {batch.shape} incompatible with input_dim={config.input_dim}"
        )
    return batch


def _forward_cached(
    config: ModelConfig,
    weights: ModelWeights,
    batch: np.ndarray,
    mode: str,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, list[dict]]:
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    x = _check_batch(config, batch)
    caches = []
    h = x
    for i, layer in enumerate(config.layers):
        w = weights[f"layer{i}/W"].array.astype(np.float64, copy=False)
        b = weights[f"layer{i}/b"].array.astype(np.float64, copy=False)
        z = h @ w + b
        a = _activate(layer.activation, z)
        mask = None
        if mode == "train" and layer.dropout_rate > 0.0:
            if rng is None:
                raise ValueError("train-mode forward with dropout needs an rng")
            keep = 1.0 - layer.dropout_rate
            mask = (rng.random(a.shape) < keep).astype(np.float64) / keep
            out = a * mask
        else:
            out = a
        caches.append({"input": h, "z": z, "a": a, "mask": mask, "layer": layer})
        h = out
    w = weights["output/W"].array.astype(np.float64, copy=False)
    b = weights["output/b"].array.astype(np.float64, copy=False)
    z_out = h @ w + b
    p = _sigmoid(z_out)
    caches.append({"input": h, "z": z_out})
    return p[:, 0], caches


def forward(
    config: ModelConfig,
    weights: ModelWeights,
    batch: np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Predicted positive-class probabilities, one per batch row."""
    p, _ = _forward_cached(config, weights, batch, mode, rng)
    return p


def bce_loss(p: np.ndarray, y: np.ndarray) -> float:
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def loss_and_grad(
    config: ModelConfig,
    weights: ModelWeights,
    batch: np.ndarray,
    labels: np.ndarray,
    modifier: GradientModifier | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[float, ModelWeights]:
    """Mean binary cross-entropy and its gradient w.r.t. every block.

    Runs the train-mode forward pass (dropout active where configured).
    ``modifier``, when given, rewrites the raw gradient bundle; it is used to
    realize algorithm-specific local objectives.
    """
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    p, caches = _forward_cached(config, weights, batch, "train", rng)
    if p.shape[0] != y.shape[0]:
        raise ValueError(f"{p.shape[0]} predictions vs {y.shape[0]} labels")
    n = y.shape[0]
    loss = bce_loss(p, y)

    clamped = (p < PROB_EPS) | (p > 1.0 - PROB_EPS)
    g_z = ((p - y) / n)
    g_z[clamped] = 0.0
    g_z = g_z[:, None]

    grads: dict[str, np.ndarray] = {}
    out_cache = caches[-1]
    w_out = weights["output/W"].array.astype(np.float64, copy=False)
    grads["output/W"] = out_cache["input"].T @ g_z
    grads["output/b"] = g_z.sum(axis=0)
    dh = g_z @ w_out.T

    for i in reversed(range(len(config.layers))):
        cache = caches[i]
        layer = cache["layer"]
        if cache["mask"] is not None:
            da = dh * cache["mask"]
        else:
            da = dh
        dz = da * _activate_grad(layer.activation, cache["z"], cache["a"])
        w_i = weights[f"layer{i}/W"].array.astype(np.float64, copy=False)
        grads[f"layer{i}/W"] = cache["input"].T @ dz
        grads[f"layer{i}/b"] = dz.sum(axis=0)
        dh = dz @ w_i.T

    grad_blocks = [
        TensorBlock(b.name, b.shape, b.dtype, grads[b.name].reshape(-1)) for b in weights.blocks
    ]
    grad_bundle = ModelWeights(grad_blocks)
    if modifier is not None:
        grad_bundle = modifier(weights, grad_bundle)
    return loss, grad_bundle
