"""Quick end-to-end drive of a local federation (development aid)."""

import json
import sys
import tempfile

from fedbus.client.loaders import DataLoaderSpec, register_memory_dataset
from fedbus.client.node import ClientConfig
from fedbus.federation import LocalFederation
from fedbus.model.data import shard_among_clients, stratified_split, synth_dataset


def main() -> int:
    full = synth_dataset(seed=1, n_samples=300, prevalence=0.3, n_features=8,
                         separation=3.0)
    train, test = stratified_split(full, 0.2, 0)
    shards = shard_among_clients(train, 3, 1)
    configs = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, shard in enumerate(shards):
            register_memory_dataset(f"smoke/{i}", shard, test)
            configs.append(ClientConfig(
                client_id=f"client-{i}", role="participant",
                loader=DataLoaderSpec(kind="memory", path=f"smoke/{i}"),
                artifact_root=f"{tmp}/c{i}",
            ))
        request = {
            "model_config": {
                "input_dim": 8,
                "layers": [{"units": 16, "activation": "tanh"}],
                "output_activation": "sigmoid",
                "seed_policy": "explicit",
                "init_seed": 11,
            },
            "settings": {
                "rounds": 3,
                "min_replies": 3,
                "ack_timeout": 5.0,
                "train_timeout": 30.0,
                "eval_timeout": 10.0,
                "post_eval": True,
                "algorithm": {"kind": "fedavg"},
                "training": {"batch_size": 16, "epochs": 1,
                             "learning_rate": 0.01, "rng_seed": 3},
            },
        }
        fed = LocalFederation(configs, artifact_root=f"{tmp}/fed",
                              prefix="fed/smoke", heartbeat_interval=0.2)
        with fed:
            record = fed.run_to_completion(request, timeout=60.0)
            print(json.dumps(record, indent=2, default=str))
            server_rec = fed.server_record(record["experiment_id"])
            print("server status:", server_rec.status)
            print("rounds:", [r.get("aggregated") for r in server_rec.rounds])
            print("network:")
            for node in fed.cc.get_network_status():
                print(" ", node["client_id"], node["role"], node["state"],
                      "stale" if node["stale"] else "fresh")
    return 0


if __name__ == "__main__":
    sys.exit(main())
