from .tensors import TensorBlock, ModelWeights
from .config import ModelConfig, LayerConfig, TrainingSettings
from .network import build_model, forward, loss_and_grad, glorot_limit
from .optim import SgdOptimizer, AdamOptimizer, make_optimizer
from .training import TrainResult, train_local
from .metrics import EvalMetrics, evaluate, average_precision, precision_recall_f1
from .data import (
    Dataset,
    CsvSchema,
    FeatureStats,
    load_csv_dataset,
    fit_feature_stats,
    apply_feature_stats,
    split_dataset,
    stratified_split,
    fold_membership,
    take_fold,
    shard_among_clients,
    synth_dataset,
)

__all__ = [
    "TensorBlock",
    "ModelWeights",
    "ModelConfig",
    "LayerConfig",
    "TrainingSettings",
    "build_model",
    "forward",
    "loss_and_grad",
    "glorot_limit",
    "SgdOptimizer",
    "AdamOptimizer",
    "make_optimizer",
    "TrainResult",
    "train_local",
    "EvalMetrics",
    "evaluate",
    "average_precision",
    "precision_recall_f1",
    "Dataset",
    "CsvSchema",
    "FeatureStats",
    "load_csv_dataset",
    "fit_feature_stats",
    "apply_feature_stats",
    "split_dataset",
    "stratified_split",
    "fold_membership",
    "take_fold",
    "shard_among_clients",
    "synth_dataset",
]
