"""Thresholded classification metrics and average precision.

Average precision follows the step-function definition: samples sorted by
descending score, tied scores collapsed into one threshold point, and
AP = sum_k (R_k - R_{k-1}) * P_k. Terms are accumulated with ``math.fsum``
so the result does not depend on summation grouping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .config import ModelConfig
from .network import bce_loss, forward
from .tensors import ModelWeights


@dataclass(frozen=True)
class EvalMetrics:
    loss: float
    precision: float
    recall: float
    f1: float
    auprc: float
    n_samples: int
    threshold_used: float

    def to_doc(self) -> dict:
        return asdict(self)

    @classmethod
    def from_doc(cls, doc: dict) -> "EvalMetrics":
        return cls(**doc)


def precision_recall_f1(
    scores: np.ndarray, labels: np.ndarray, threshold: float
) -> tuple[float, float, float]:
    """Precision, recall, F1 at a threshold; empty denominators count as 0."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    predicted = scores >= threshold
    tp = int(np.sum(predicted & (labels == 1)))
    fp = int(np.sum(predicted & (labels == 0)))
    fn = int(np.sum(~predicted & (labels == 1)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise ValueError("average precision undefined without positive labels")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = (labels[order] == 1).astype(np.int64)

    # indices closing each group of tied scores
    last_in_group = np.nonzero(np.diff(sorted_scores))[0]
    cut = np.append(last_in_group, len(sorted_scores) - 1)

    tp = np.cumsum(sorted_labels)[cut]
    pp = cut + 1
    prev_tp = np.concatenate(([0], tp[:-1]))
    terms = [
        (t - pt) / n_pos * (t / p) for t, pt, p in zip(tp.tolist(), prev_tp.tolist(), pp.tolist())
    ]
    return math.fsum(terms)


def evaluate(
    config: ModelConfig,
    weights: ModelWeights,
    dataset,
    threshold: float = 0.5,
) -> EvalMetrics:
    """Loss, thresholded precision/recall/F1 and AUPRC on a dataset."""
    x = np.asarray(dataset.features, dtype=np.float64)
    y = np.asarray(dataset.labels)
    if x.shape[0] == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    scores = forward(config, weights, x, mode="infer")
    loss = bce_loss(scores, y.astype(np.float64))
    precision, recall, f1 = precision_recall_f1(scores, y, threshold)
    auprc = average_precision(scores, y)
    return EvalMetrics(
        loss=loss,
        precision=precision,
        recall=recall,
        f1=f1,
        auprc=auprc,
        n_samples=int(x.shape[0]),
        threshold_used=threshold,
    )
