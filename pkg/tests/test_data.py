"""CSV ingestion, stratified splitting, and the synthetic generator."""

from __future__ import annotations

import numpy as np
import pytest

from fedbus.model.data import (
    CsvSchema,
    DataError,
    Dataset,
    apply_feature_stats,
    fit_feature_stats,
    fold_membership,
    load_csv_dataset,
    shard_among_clients,
    split_dataset,
    stratified_split,
    synth_dataset,
    take_fold,
)

SCHEMA = CsvSchema(
    label="outcome",
    columns={"age": "numeric", "color": ("red", "green", "blue"), "score": "numeric"},
    positive_value="yes",
    drop=("id",),
)


def write_csv(path, rows, header="id,age,color,score,outcome"):
    lines = [header] + rows
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_csv_happy_path_one_hot_and_labels(tmp_path):
    path = write_csv(
        tmp_path / "d.csv",
        [
            "1,10,red,0.5,yes",
            "2,20,blue,1.5,no",
            "3,30,green,2.5,yes",
        ],
    )
    ds = load_csv_dataset(path, SCHEMA, standardize=False)
    assert ds.feature_names == [
        "age",
        "color=red",
        "color=green",
        "color=blue",
        "score",
    ]
    assert ds.numeric_idx == [0, 4]
    np.testing.assert_array_equal(ds.labels, [1, 0, 1])
    np.testing.assert_allclose(ds.features[:, 0], [10.0, 20.0, 30.0])
    np.testing.assert_array_equal(
        ds.features[:, 1:4], [[1, 0, 0], [0, 0, 1], [0, 1, 0]]
    )


def test_csv_median_imputation(tmp_path):
    path = write_csv(
        tmp_path / "d.csv",
        [
            "1,10,red,1,yes",
            "2,N/A,red,2,no",
            "3,30,red,3,no",
            "4,,red,4,no",
            "5,50,red,5,yes",
        ],
    )
    ds = load_csv_dataset(path, SCHEMA, standardize=False)
    # median of observed {10, 30, 50} fills both missing cells
    np.testing.assert_allclose(ds.features[:, 0], [10, 30, 30, 30, 50])


def test_csv_standardization_from_train_stats(tmp_path):
    train = load_csv_dataset(
        write_csv(tmp_path / "a.csv", ["1,0,red,0,no", "2,4,red,8,yes"]),
        SCHEMA,
        standardize=False,
    )
    stats = fit_feature_stats(train)
    np.testing.assert_allclose(stats.mean, [2.0, 4.0])
    np.testing.assert_allclose(stats.std, [2.0, 4.0])
    held = load_csv_dataset(
        write_csv(tmp_path / "b.csv", ["3,6,red,12,no"]), SCHEMA, stats=stats
    )
    # z-scored against the training statistics, not its own
    np.testing.assert_allclose(held.features[0, 0], 2.0)
    np.testing.assert_allclose(held.features[0, 4], 2.0)
    # one-hot columns untouched
    assert held.features[0, 1] == 1.0


def test_feature_stats_zero_std_guard():
    ds = Dataset(np.array([[3.0], [3.0]]), np.array([0, 1]), ["x"], [0])
    stats = fit_feature_stats(ds)
    assert stats.std[0] == 1.0
    out = apply_feature_stats(ds, stats)
    np.testing.assert_allclose(out.features[:, 0], [0.0, 0.0])


def test_csv_bad_numeric_reports_line_and_column(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["1,10,red,1,no", "2,oops,red,2,no"])
    with pytest.raises(DataError, match=r"line 3: column 'age'.*'oops'"):
        load_csv_dataset(path, SCHEMA)


def test_csv_unseen_level_reports_line(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["1,10,purple,1,no"])
    with pytest.raises(DataError, match=r"line 2: column 'color': unseen level 'purple'"):
        load_csv_dataset(path, SCHEMA)


def test_csv_header_errors(tmp_path):
    unknown = write_csv(
        tmp_path / "u.csv", ["1,10,red,1,no,x"], header="id,age,color,score,outcome,extra"
    )
    with pytest.raises(DataError, match=r"unknown columns \['extra'\]"):
        load_csv_dataset(unknown, SCHEMA)
    missing = write_csv(tmp_path / "m.csv", ["1,10,1,no"], header="id,age,score,outcome")
    with pytest.raises(DataError, match=r"missing columns \['color'\]"):
        load_csv_dataset(missing, SCHEMA)
    empty = tmp_path / "e.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(DataError, match="missing header row"):
        load_csv_dataset(empty, SCHEMA)


def test_csv_no_rows_and_all_missing_column(tmp_path):
    path = write_csv(tmp_path / "d.csv", [])
    with pytest.raises(DataError, match="no data rows"):
        load_csv_dataset(path, SCHEMA)
    path = write_csv(tmp_path / "e.csv", ["1,N/A,red,1,no", "2,,red,2,no"])
    with pytest.raises(DataError, match="'age' has no observed values"):
        load_csv_dataset(path, SCHEMA)


def test_dataset_validation():
    with pytest.raises(DataError, match="2-D"):
        Dataset(np.zeros(3), np.zeros(3, dtype=int), ["x"])
    with pytest.raises(DataError, match="feature rows vs"):
        Dataset(np.zeros((3, 1)), np.array([0, 1]), ["x"])
    with pytest.raises(DataError, match=r"labels must be 0/1"):
        Dataset(np.zeros((2, 1)), np.array([0, 2]), ["x"])
    a = Dataset(np.zeros((2, 1)), np.array([0, 1]), ["x"])
    b = Dataset(np.zeros((2, 1)), np.array([0, 1]), ["y"])
    with pytest.raises(DataError, match="different feature columns"):
        a.concat(b)


def test_subset_is_a_copy():
    ds = Dataset(np.arange(6, dtype=float).reshape(3, 2), np.array([0, 1, 0]), ["a", "b"])
    sub = ds.subset([0, 2])
    sub.features[0, 0] = 99.0
    assert ds.features[0, 0] == 0.0


def test_fold_membership_stratified_and_deterministic():
    rng = np.random.default_rng(0)
    labels = (rng.random(203) < 0.2).astype(int)
    folds = fold_membership(labels, 5, seed=42)
    again = fold_membership(labels, 5, seed=42)
    np.testing.assert_array_equal(folds, again)
    assert set(np.unique(folds)) == set(range(5))
    sizes = [int(np.sum(folds == k)) for k in range(5)]
    assert max(sizes) - min(sizes) <= 1
    pos_sizes = [int(np.sum((folds == k) & (labels == 1))) for k in range(5)]
    assert max(pos_sizes) - min(pos_sizes) <= 1
    assert not np.array_equal(folds, fold_membership(labels, 5, seed=43))


def test_fold_membership_errors():
    labels = np.array([1, 1, 0, 0, 0, 0, 0, 0])
    with pytest.raises(DataError, match="2 positives cannot stratify 3 folds"):
        fold_membership(labels, 3, seed=0)
    with pytest.raises(DataError, match="k_folds"):
        fold_membership(labels, 1, seed=0)


def test_take_fold_partitions():
    ds = synth_dataset(seed=5, n_samples=100, prevalence=0.3, n_features=4)
    folds = fold_membership(ds.labels, 4, seed=9)
    train, test = take_fold(ds, folds, 2)
    assert len(train) + len(test) == len(ds)
    assert len(test) == int(np.sum(folds == 2))
    assert train.n_positive + test.n_positive == ds.n_positive


def test_shard_among_clients_balance():
    ds = synth_dataset(seed=1, n_samples=101, prevalence=0.25, n_features=3)
    shards = shard_among_clients(ds, 3, seed=8)
    assert sum(len(s) for s in shards) == len(ds)
    sizes = [len(s) for s in shards]
    assert max(sizes) - min(sizes) <= 1
    pos = [s.n_positive for s in shards]
    assert max(pos) - min(pos) <= 1
    with pytest.raises(DataError, match="n_clients"):
        shard_among_clients(ds, 0, seed=8)


def test_stratified_split_counts():
    ds = synth_dataset(seed=2, n_samples=200, prevalence=0.2, n_features=3)
    rest, taken = stratified_split(ds, 0.25, seed=4)
    assert len(taken) == round(0.25 * 40) + round(0.25 * 160)
    assert taken.n_positive == round(0.25 * 40)
    assert len(rest) + len(taken) == len(ds)
    with pytest.raises(DataError, match="fraction"):
        stratified_split(ds, 1.0, seed=4)


def test_split_dataset_combines_pieces():
    ds = synth_dataset(seed=3, n_samples=240, prevalence=0.25, n_features=4)
    result = split_dataset(ds, test_fraction=0.2, k_folds=4, n_clients=3, seed=17)
    assert len(result.folds) == len(ds)
    assert len(result.test_set) + sum(len(s) for s in result.client_shards) == len(ds)
    shard_pos = [s.n_positive for s in result.client_shards]
    assert max(shard_pos) - min(shard_pos) <= 1


def test_synth_dataset_forced_prevalence():
    ds = synth_dataset(seed=11, n_samples=500, prevalence=0.05, n_features=6)
    assert ds.n_positive == 25
    assert ds.features.shape == (500, 6)
    assert ds.numeric_idx == list(range(6))
    again = synth_dataset(seed=11, n_samples=500, prevalence=0.05, n_features=6)
    np.testing.assert_array_equal(ds.features, again.features)
    np.testing.assert_array_equal(ds.labels, again.labels)
    with pytest.raises(DataError, match="prevalence"):
        synth_dataset(seed=1, n_samples=10, prevalence=0.9, n_features=2)


def test_synth_dataset_class_separation():
    sep = 2.0
    ds = synth_dataset(seed=13, n_samples=20000, prevalence=0.5, n_features=4)
    mu_pos = ds.features[ds.labels == 1].mean(axis=0)
    mu_neg = ds.features[ds.labels == 0].mean(axis=0)
    gap = float(np.linalg.norm(mu_pos - mu_neg))
    assert abs(gap - sep) < 0.1
