"""Shared builders for the test suite.

Most tests construct small federations around in-memory datasets; the
helpers here keep those setups short and uniform. Dataset names passed to
the memory loader are tagged per test to avoid registry collisions.
"""

from __future__ import annotations

import itertools

import pytest

from fedbus.client.loaders import (
    DataLoaderSpec,
    clear_memory_datasets,
    register_memory_dataset,
)
from fedbus.client.node import ClientConfig
from fedbus.model.data import shard_among_clients, stratified_split, synth_dataset

_tag_counter = itertools.count()


@pytest.fixture(autouse=True)
def _fresh_memory_registry():
    yield
    clear_memory_datasets()


def model_doc(input_dim: int = 8, units: int = 16, init_seed: int = 11,
              dropout: float = 0.0) -> dict:
    return {
        "input_dim": input_dim,
        "layers": [{"units": units, "activation": "tanh", "dropout_rate": dropout}],
        "output_activation": "sigmoid",
        "seed_policy": "explicit",
        "init_seed": init_seed,
    }


def request_doc(rounds: int = 2, min_replies: int = 3, algorithm: dict | None = None,
                training: dict | None = None, controllers: dict | None = None,
                **settings_overrides) -> dict:
    settings = {
        "rounds": rounds,
        "min_replies": min_replies,
        "ack_timeout": 5.0,
        "train_timeout": 30.0,
        "eval_timeout": 10.0,
        "pre_eval": False,
        "post_eval": True,
        "allow_metrics_upload_default": True,
        "algorithm": algorithm or {"kind": "fedavg"},
        "training": training or {"batch_size": 16, "epochs": 1,
                                 "learning_rate": 0.01, "rng_seed": 3},
    }
    if controllers is not None:
        settings["controllers"] = controllers
    settings.update(settings_overrides)
    return {"model_config": model_doc(), "settings": settings}


def make_clients(tmp_path, n_participants: int = 3, n_observers: int = 0,
                 seed: int = 1, n_features: int = 8):
    """Client configs over a fresh synthetic dataset split.

    Returns (configs, test_dataset); participants get stratified shards of
    the training portion, observers get only the shared test set.
    """
    tag = f"t{next(_tag_counter)}"
    full = synth_dataset(seed=seed, n_samples=300, prevalence=0.3,
                         n_features=n_features, separation=3.0)
    train, test = stratified_split(full, 0.2, seed)
    shards = shard_among_clients(train, max(n_participants, 1), seed)
    configs = []
    for i in range(n_participants):
        name = f"{tag}/participant-{i}"
        register_memory_dataset(name, shards[i], test)
        configs.append(ClientConfig(
            client_id=f"client-{i}", role="participant",
            loader=DataLoaderSpec(kind="memory", path=name),
            artifact_root=str(tmp_path / f"client-{i}"),
        ))
    for i in range(n_observers):
        name = f"{tag}/observer-{i}"
        register_memory_dataset(name, None, test)
        configs.append(ClientConfig(
            client_id=f"observer-{i}", role="observer",
            loader=DataLoaderSpec(kind="memory", path=name),
            artifact_root=str(tmp_path / f"observer-{i}"),
        ))
    return configs, test
