"""Average precision against an O(n^2) threshold-enumeration oracle."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fedbus.model.config import LayerConfig, ModelConfig
from fedbus.model.data import Dataset
from fedbus.model.metrics import (
    average_precision,
    evaluate,
    precision_recall_f1,
)
from fedbus.model.network import build_model


def brute_force_ap(scores, labels) -> float:
    """Walk every distinct score as a threshold, highest first, and sum the
    step areas (R_k - R_{k-1}) * P_k with exact bookkeeping."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    assert n_pos > 0
    thresholds = sorted(set(scores.tolist()), reverse=True)
    terms = []
    prev_recall = 0.0
    for t in thresholds:
        predicted = scores >= t
        tp = int(np.sum(predicted & (labels == 1)))
        pp = int(np.sum(predicted))
        precision = tp / pp
        recall = tp / n_pos
        terms.append((recall - prev_recall) * precision)
        prev_recall = recall
    return math.fsum(terms)


def test_average_precision_matches_brute_force_500_instances():
    rng = np.random.default_rng(77)
    for trial in range(500):
        n = int(rng.integers(2, 33))
        labels = rng.integers(0, 2, size=n)
        if labels.sum() == 0:
            labels[int(rng.integers(n))] = 1
        # coarse grid forces plenty of ties
        scores = rng.integers(0, 5, size=n) / 4.0
        got = average_precision(scores, labels)
        want = brute_force_ap(scores, labels)
        assert got == pytest.approx(want, abs=1e-12), f"trial {trial}"


def test_average_precision_extremes():
    labels = np.array([0, 0, 1, 1])
    perfect = np.array([0.1, 0.2, 0.8, 0.9])
    assert average_precision(perfect, labels) == 1.0
    constant = np.full(4, 0.5)
    # one tie group covering everything: AP equals prevalence
    assert average_precision(constant, labels) == pytest.approx(0.5)
    inverted = np.array([0.9, 0.8, 0.2, 0.1])
    assert average_precision(inverted, labels) == pytest.approx(
        brute_force_ap(inverted, labels))
    with pytest.raises(ValueError):
        average_precision(perfect, np.zeros(4))


def test_average_precision_prevalence_for_constant_scores_random_sizes():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(2, 50))
        labels = rng.integers(0, 2, size=n)
        if labels.sum() == 0:
            labels[0] = 1
        ap = average_precision(np.full(n, 0.3), labels)
        assert ap == pytest.approx(labels.sum() / n)


def test_precision_recall_f1_counts():
    scores = np.array([0.9, 0.8, 0.4, 0.3])
    labels = np.array([1, 0, 1, 0])
    p, r, f1 = precision_recall_f1(scores, labels, 0.5)
    assert p == pytest.approx(0.5)   # tp=1 fp=1
    assert r == pytest.approx(0.5)   # fn=1
    assert f1 == pytest.approx(0.5)
    # nothing predicted positive: all zero, no division error
    p, r, f1 = precision_recall_f1(scores, labels, 0.95)
    assert (p, r, f1) == (0.0, 0.0, 0.0)


def test_threshold_is_inclusive():
    scores = np.array([0.5, 0.49999])
    labels = np.array([1, 1])
    p, r, _ = precision_recall_f1(scores, labels, 0.5)
    assert r == pytest.approx(0.5)  # only the exact-threshold sample counts


def test_evaluate_end_to_end():
    config = ModelConfig(input_dim=2, layers=(LayerConfig(units=4),), init_seed=0)
    weights = build_model(config, 0)
    rng = np.random.default_rng(1)
    features = rng.normal(size=(40, 2))
    labels = (features[:, 0] > 0).astype(np.int64)
    ds = Dataset(features=features, labels=labels,
                 feature_names=("a", "b"), numeric_idx=(0, 1))
    m = evaluate(config, weights, ds, threshold=0.5)
    assert m.n_samples == 40
    assert m.threshold_used == 0.5
    assert 0.0 <= m.auprc <= 1.0
    assert math.isfinite(m.loss)
    round_tripped = type(m).from_doc(m.to_doc())
    assert round_tripped == m


def test_evaluate_rejects_empty():
    config = ModelConfig(input_dim=2, layers=(LayerConfig(units=4),), init_seed=0)
    weights = build_model(config, 0)
    empty = Dataset(features=np.zeros((0, 2)), labels=np.zeros(0, dtype=np.int64),
                    feature_names=("a", "b"), numeric_idx=(0, 1))
    with pytest.raises(ValueError):
        evaluate(config, weights, empty)
