"""Tabular dataset ingestion: CSV parsing, one-hot encoding, standardization,
stratified splitting, and a synthetic imbalanced generator."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

MISSING_TOKENS = {"", "N/A", "NA", "n/a", "nan", "NaN"}


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str]
    numeric_idx: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"{self.features.shape[0]} feature rows vs {self.labels.shape[0]} labels"
            )
        bad = set(np.unique(self.labels)) - {0, 1}
        if bad:
            raise DataError(f"labels must be 0/1, found {sorted(bad)}")

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.labels == 1))

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx].copy(),
            self.labels[idx].copy(),
            list(self.feature_names),
            list(self.numeric_idx),
        )

    def concat(self, other: "Dataset") -> "Dataset":
        if self.feature_names != other.feature_names:
            raise DataError("cannot concatenate datasets with different feature columns")
        return Dataset(
            np.vstack([self.features, other.features]),
            np.concatenate([self.labels, other.labels]),
            list(self.feature_names),
            list(self.numeric_idx),
        )


@dataclass(frozen=True)
class CsvSchema:
    """Declared CSV layout with frozen one-hot level lists.

    ``columns`` maps each feature column to either the string "numeric" or
    the explicit tuple of categorical levels allowed for it. Levels are fixed
    when the schema is created; an unseen level at load time is an error.
    """

    label: str
    columns: dict[str, object]
    positive_value: str = "1"
    drop: tuple[str, ...] = ()

    def numeric_columns(self) -> list[str]:
        return [c for c, kind in self.columns.items() if kind == "numeric"]

    def categorical_columns(self) -> list[str]:
        return [c for c, kind in self.columns.items() if kind != "numeric"]


# Kaggle stroke-prediction CSV layout; level lists from the dataset card.
# One-hot expansion: 6 numeric + 3 + 2 + 5 + 2 + 4 = 22 feature columns.
STROKE_SCHEMA = CsvSchema(
    label="stroke",
    columns={
        "gender": ("Male", "Female", "Other"),
        "age": "numeric",
        "hypertension": "numeric",
        "heart_disease": "numeric",
        "ever_married": ("Yes", "No"),
        "work_type": ("children", "Govt_job", "Never_worked", "Private", "Self-employed"),
        "Residence_type": ("Rural", "Urban"),
        "avg_glucose_level": "numeric",
        "bmi": "numeric",
        "smoking_status": ("formerly smoked", "never smoked", "smokes", "Unknown"),
    },
    positive_value="1",
    drop=("id",),
)


@dataclass(frozen=True)
class FeatureStats:
    """Per-column standardization statistics fitted on a training split."""

    mean: np.ndarray
    std: np.ndarray
    numeric_idx: tuple[int, ...]


def fit_feature_stats(dataset: Dataset) -> FeatureStats:
    idx = tuple(dataset.numeric_idx)
    cols = dataset.features[:, list(idx)] if idx else np.zeros((len(dataset), 0))
    mean = cols.mean(axis=0) if cols.size else np.zeros(0)
    std = cols.std(axis=0) if cols.size else np.zeros(0)
    std = np.where(std == 0.0, 1.0, std)
    return FeatureStats(mean=mean, std=std, numeric_idx=idx)


def apply_feature_stats(dataset: Dataset, stats: FeatureStats) -> Dataset:
    out = dataset.features.copy()
    if stats.numeric_idx:
        cols = list(stats.numeric_idx)
        out[:, cols] = (out[:, cols] - stats.mean) / stats.std
    return Dataset(out, dataset.labels.copy(), list(dataset.feature_names), list(dataset.numeric_idx))


def _parse_numeric(value: str, column: str, line_no: int) -> float | None:
    if value.strip() in MISSING_TOKENS:
        return None
    try:
        return float(value)
    except ValueError:
        raise DataError(f"line {line_no}: column {column!r}: cannot parse {value!r} as number")


def load_csv_dataset(
    path,
    schema: CsvSchema,
    stats: FeatureStats | None = None,
    standardize: bool = True,
) -> Dataset:
    """Parse a CSV file into a model-ready feature matrix.

    Numeric columns: missing values ("N/A" or empty) imputed with the column
    median; standardized to z-scores unless ``standardize`` is false. When
    ``stats`` is given (fitted on a training split) it is used instead of
    statistics from this file. Categorical columns: one-hot against the
    schema's frozen level lists. Label column mapped to {0,1}.
    """
    declared = set(schema.columns) | {schema.label} | set(schema.drop)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: missing header row")
        header = set(reader.fieldnames)
        unknown = header - declared
        if unknown:
            raise DataError(f"{path}: unknown columns {sorted(unknown)}")
        missing = (set(schema.columns) | {schema.label}) - header
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")

        numeric_cols = schema.numeric_columns()
        raw_numeric: dict[str, list[float | None]] = {c: [] for c in numeric_cols}
        raw_categorical: dict[str, list[str]] = {c: [] for c in schema.categorical_columns()}
        labels: list[int] = []
        for line_no, row in enumerate(reader, start=2):
            for col in numeric_cols:
                raw_numeric[col].append(_parse_numeric(row[col], col, line_no))
            for col, levels in schema.columns.items():
                if levels == "numeric":
                    continue
                value = row[col].strip()
                if value not in levels:
                    raise DataError(
                        f"line {line_no}: column {col!r}: unseen level {value!r}"
                    )
                raw_categorical[col].append(value)
            label_raw = row[schema.label].strip()
            labels.append(1 if label_raw == schema.positive_value else 0)

    n = len(labels)
    if n == 0:
        raise DataError(f"{path}: no data rows")

    blocks: list[np.ndarray] = []
    names: list[str] = []
    numeric_idx: list[int] = []
    for col, kind in schema.columns.items():
        if kind == "numeric":
            values = raw_numeric[col]
            observed = np.array([v for v in values if v is not None], dtype=np.float64)
            if observed.size == 0:
                raise DataError(f"column {col!r} has no observed values to impute from")
            median = float(np.median(observed))
            filled = np.array([median if v is None else v for v in values], dtype=np.float64)
            numeric_idx.append(len(names))
            names.append(col)
            blocks.append(filled[:, None])
        else:
            values = raw_categorical[col]
            onehot = np.zeros((n, len(kind)), dtype=np.float64)
            index = {level: j for j, level in enumerate(kind)}
            for i, v in enumerate(values):
                onehot[i, index[v]] = 1.0
            names.extend(f"{col}={level}" for level in kind)
            blocks.append(onehot)

    dataset = Dataset(np.hstack(blocks), np.array(labels), names, numeric_idx)
    if standardize:
        dataset = apply_feature_stats(dataset, stats or fit_feature_stats(dataset))
    elif stats is not None:
        dataset = apply_feature_stats(dataset, stats)
    return dataset


def _spread_cyclically(groups: list[np.ndarray], n_bins: int) -> np.ndarray:
    """Assign indices to bins round-robin, continuing the cycle across groups
    so bin sizes stay within +/-1 globally and per group."""
    total = sum(len(g) for g in groups)
    assignment = np.zeros(total, dtype=np.int64)
    cursor = 0
    for group in groups:
        for j, idx in enumerate(group):
            assignment[idx] = (cursor + j) % n_bins
        cursor = (cursor + len(group)) % n_bins
    return assignment


def fold_membership(labels: np.ndarray, k_folds: int, seed: int) -> np.ndarray:
    """Stratified fold id (0..k-1) per sample, deterministic for a seed."""
    labels = np.asarray(labels)
    if k_folds < 2:
        raise DataError("k_folds must be >= 2")
    n_pos = int(np.sum(labels == 1))
    if n_pos < k_folds:
        raise DataError(f"{n_pos} positives cannot stratify {k_folds} folds")
    rng = np.random.default_rng(seed)
    groups = []
    for cls in (1, 0):
        idx = np.nonzero(labels == cls)[0]
        groups.append(rng.permutation(idx))
    return _spread_cyclically(groups, k_folds)


def take_fold(dataset: Dataset, folds: np.ndarray, fold: int) -> tuple[Dataset, Dataset]:
    """(train, held-out) datasets for one fold id."""
    test_mask = folds == fold
    return dataset.subset(np.nonzero(~test_mask)[0]), dataset.subset(np.nonzero(test_mask)[0])


def shard_among_clients(dataset: Dataset, n_clients: int, seed: int) -> list[Dataset]:
    """Stratified near-equal shards (sizes within +/-1), deterministic."""
    if n_clients < 1:
        raise DataError("n_clients must be >= 1")
    rng = np.random.default_rng(seed)
    groups = []
    for cls in (1, 0):
        idx = np.nonzero(dataset.labels == cls)[0]
        groups.append(rng.permutation(idx))
    assignment = _spread_cyclically(groups, n_clients)
    return [dataset.subset(np.nonzero(assignment == c)[0]) for c in range(n_clients)]


def stratified_split(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """(rest, taken): per-class random draw of round(fraction * n_class)."""
    if not (0.0 < fraction < 1.0):
        raise DataError("fraction must be in (0,1)")
    rng = np.random.default_rng(seed)
    taken_parts = []
    rest_parts = []
    for cls in (1, 0):
        idx = rng.permutation(np.nonzero(dataset.labels == cls)[0])
        n_taken = int(round(fraction * len(idx)))
        taken_parts.append(idx[:n_taken])
        rest_parts.append(idx[n_taken:])
    return (
        dataset.subset(np.concatenate(rest_parts)),
        dataset.subset(np.concatenate(taken_parts)),
    )


@dataclass
class SplitResult:
    client_shards: list[Dataset]
    test_set: Dataset
    folds: np.ndarray


def split_dataset(
    dataset: Dataset,
    test_fraction: float,
    k_folds: int,
    n_clients: int,
    seed: int,
) -> SplitResult:
    """Stratified test split plus client shards, and fold ids for CV reuse.

    The test set holds ``test_fraction`` of each class (rounded); remaining
    samples are sharded near-equally across clients. ``folds`` assigns every
    sample a stratified fold id over the full dataset for cross-validation.
    """
    folds = fold_membership(dataset.labels, k_folds, seed)
    train_ds, test_ds = stratified_split(dataset, test_fraction, seed + 1)
    shards = shard_among_clients(train_ds, n_clients, seed + 2)
    return SplitResult(client_shards=shards, test_set=test_ds, folds=folds)


def synth_dataset(
    seed: int,
    n_samples: int,
    prevalence: float,
    n_features: int,
    separation: float = 2.0,
) -> Dataset:
    """Two-Gaussian-mixture binary data with a forced positive count.

    Class means sit ``separation`` standard deviations apart (Euclidean),
    split evenly across feature axes; unit-variance noise per axis.
    """
    if not (0.0 < prevalence <= 0.5):
        raise DataError("prevalence must be in (0, 0.5]")
    rng = np.random.default_rng(seed)
    n_pos = int(round(prevalence * n_samples))
    labels = np.zeros(n_samples, dtype=np.int64)
    labels[:n_pos] = 1
    offset = separation / np.sqrt(n_features)
    means = np.where(labels[:, None] == 1, offset / 2.0, -offset / 2.0)
    features = rng.normal(size=(n_samples, n_features)) + means
    order = rng.permutation(n_samples)
    names = [f"x{i}" for i in range(n_features)]
    return Dataset(features[order], labels[order], names, list(range(n_features)))
