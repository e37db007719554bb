"""Local / centralized / federated comparison harness.

Per cross-validation fold: the held-out fold is the common test set, the
remainder is sharded across clients. Local trains each shard separately,
centralized trains the pooled remainder, federated runs the full platform
in-process (embedded broker, real envelopes and codec). Model, optimizer,
schedule, and epoch/round budget are matched across methods, and the
federated path is audited through broker publish counts so it cannot
silently degrade into an in-memory shortcut.
"""

from __future__ import annotations

import csv
import io
import json
import os
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..client.loaders import DataLoaderSpec, register_memory_dataset
from ..client.node import ClientConfig
from ..federation import LocalFederation
from ..model.config import ModelConfig, TrainingSettings
from ..model.data import (
    Dataset,
    STROKE_SCHEMA,
    fold_membership,
    load_csv_dataset,
    shard_among_clients,
    synth_dataset,
    take_fold,
)
from ..model.metrics import EvalMetrics, evaluate
from ..model.network import build_model
from ..model.training import derive_seed, train_local
from ..schedulers import initial_scheduler, scheduler_round

DATA_ENV_VAR = "FEDBENCH_DATA"

FEDERATED_ALGORITHMS = {
    "fedavg": {"kind": "fedavg"},
    "fedprox": {"kind": "fedprox", "mu": 0.1},
    "feddyn": {"kind": "feddyn", "mu": 0.1},
    "scaffold": {"kind": "scaffold", "local_lr": 1e-3},
}

ALL_METHODS = ("local", "centralized", "fedavg", "fedprox", "feddyn", "scaffold")

METRIC_KEYS = ("precision", "recall", "f1", "auprc")


@dataclass(frozen=True)
class BenchConfig:
    data: str = "synthetic"  # csv path, or the literal "synthetic"
    methods: tuple = ALL_METHODS
    folds: int = 5
    n_clients: int = 3
    seed: int = 7
    budget: int = 128          # max epochs (or rounds x 1 local epoch)
    plateau_patience: int = 16
    stop_patience: int = 48
    hidden_units: int = 64
    dropout_rate: float = 0.5
    batch_size: int = 32
    learning_rate: float = 1e-3
    synth_samples: int = 4000
    synth_features: int = 16
    synth_prevalence: float = 0.05
    synth_separation: float = 1.6

    def validate(self) -> None:
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        federated = [m for m in self.methods if m in FEDERATED_ALGORITHMS]
        if federated and self.n_clients < 2:
            raise ValueError("federated methods need n_clients >= 2")


@dataclass
class FoldRun:
    fold: int
    metrics: EvalMetrics
    rounds_run: int
    extra: dict = field(default_factory=dict)


@dataclass
class MethodResult:
    method: str
    fold_runs: list[FoldRun]

    def summary(self) -> dict:
        row: dict = {"method": self.method, "runs": len(self.fold_runs)}
        for key in METRIC_KEYS:
            values = [getattr(r.metrics, key) for r in self.fold_runs]
            row[f"{key}_mean"] = statistics.fmean(values)
            row[f"{key}_std"] = statistics.pstdev(values) if len(values) > 1 else 0.0
        row["rounds_mean"] = statistics.fmean(r.rounds_run for r in self.fold_runs)
        return row


def load_bench_data(config: BenchConfig) -> tuple[Dataset, str]:
    """The comparison dataset plus a provenance line for the report."""
    source = config.data or "synthetic"
    if source == "synthetic":
        env_path = os.environ.get(DATA_ENV_VAR, "")
        if env_path and Path(env_path).is_file():
            source = env_path
    if source != "synthetic":
        dataset = load_csv_dataset(source, STROKE_SCHEMA)
        return dataset, f"stroke csv: {source} ({len(dataset)} rows)"
    dataset = synth_dataset(
        seed=derive_seed("bench-data", config.seed),
        n_samples=config.synth_samples,
        prevalence=config.synth_prevalence,
        n_features=config.synth_features,
        separation=config.synth_separation,
    )
    return dataset, (
        f"synthetic fallback ({len(dataset)} rows, "
        f"prevalence {config.synth_prevalence:g})"
    )


def bench_model_config(input_dim: int, init_seed: int,
                       config: BenchConfig) -> ModelConfig:
    doc = {
        "input_dim": input_dim,
        "layers": [
            {"units": config.hidden_units, "activation": "tanh",
             "dropout_rate": config.dropout_rate},
            {"units": config.hidden_units, "activation": "tanh",
             "dropout_rate": config.dropout_rate},
        ],
        "output_activation": "sigmoid",
        "seed_policy": "explicit",
        "init_seed": init_seed,
    }
    return ModelConfig.from_doc(doc)


def _settings(config: BenchConfig, rng_seed: int) -> TrainingSettings:
    return TrainingSettings(
        batch_size=config.batch_size,
        epochs=1,
        learning_rate=config.learning_rate,
        rng_seed=rng_seed,
    )


def train_scheduled(model_config: ModelConfig, train: Dataset, test: Dataset,
                    config: BenchConfig, seed_tag: str) -> tuple:
    """Epoch loop with the shared plateau/early-stop schedule; returns the
    best-on-test weights and the number of epochs actually run."""
    weights = build_model(model_config, model_config.init_seed)
    best = weights
    sched = initial_scheduler(config.learning_rate, config.plateau_patience,
                              config.stop_patience)
    epochs_run = 0
    for epoch in range(config.budget):
        settings = _settings(config, derive_seed(seed_tag, config.seed, epoch))
        settings = settings.with_learning_rate(sched.current_lr)
        result = train_local(model_config, weights, train, settings)
        weights = result.weights
        epochs_run += 1
        measured = evaluate(model_config, weights, test)
        _, stop, sched = scheduler_round(sched, measured.loss, round_index=epoch)
        if sched.best_round == epoch:
            best = weights
        if stop:
            break
    return best, epochs_run


def run_local(model_config: ModelConfig, shards: list[Dataset], test: Dataset,
              config: BenchConfig, fold: int) -> tuple[EvalMetrics, int]:
    """Independent per-shard training; client metrics averaged."""
    per_client = []
    rounds = 0
    for i, shard in enumerate(shards):
        weights, epochs_run = train_scheduled(
            model_config, shard, test, config, f"local/{fold}/{i}")
        per_client.append(evaluate(model_config, weights, test))
        rounds = max(rounds, epochs_run)
    n = len(per_client)
    mean = {key: statistics.fmean(getattr(m, key) for m in per_client)
            for key in METRIC_KEYS}
    merged = EvalMetrics(
        loss=statistics.fmean(m.loss for m in per_client),
        precision=mean["precision"], recall=mean["recall"], f1=mean["f1"],
        auprc=mean["auprc"], n_samples=len(test),
        threshold_used=per_client[0].threshold_used,
    )
    return merged, rounds if n else 0


def run_centralized(model_config: ModelConfig, pooled: Dataset, test: Dataset,
                    config: BenchConfig, fold: int) -> tuple[EvalMetrics, int]:
    weights, epochs_run = train_scheduled(
        model_config, pooled, test, config, f"centralized/{fold}")
    return evaluate(model_config, weights, test), epochs_run


def _federated_request(model_config: ModelConfig, algorithm_doc: dict,
                       config: BenchConfig, fold: int) -> dict:
    training = _settings(config, derive_seed("federated", config.seed, fold))
    # fairness gate: round budget x local epochs == the centralized epoch budget
    assert config.budget * training.epochs == config.budget
    return {
        "model_config": model_config.to_doc(),
        "settings": {
            "rounds": config.budget,
            "min_replies": config.n_clients,
            "ack_timeout": 30.0,
            "train_timeout": 600.0,
            "eval_timeout": 60.0,
            "pre_eval": False,
            "post_eval": True,
            "allow_metrics_upload_default": True,
            "algorithm": dict(algorithm_doc),
            "training": training.to_doc(),
            "controllers": {
                "plateau": {"patience": config.plateau_patience, "factor": 0.5,
                            "min_delta": 1e-4},
                "early_stop": {"patience": config.stop_patience},
            },
        },
    }


def run_federated(model_config: ModelConfig, algorithm_doc: dict,
                  shards: list[Dataset], test: Dataset, config: BenchConfig,
                  fold: int, method: str, work_dir: Path) -> tuple[EvalMetrics, int, dict]:
    client_configs = []
    for i, shard in enumerate(shards):
        name = f"bench/{method}/{fold}/client-{i}"
        register_memory_dataset(name, shard, test)
        client_configs.append(ClientConfig(
            client_id=f"client-{i}",
            role="participant",
            loader=DataLoaderSpec(kind="memory", path=name),
            artifact_root=str(work_dir / f"client-{i}"),
        ))

    federation = LocalFederation(
        client_configs,
        artifact_root=work_dir,
        prefix=f"bench/{method}/f{fold}",
        heartbeat_interval=0.0,  # retained status still published on change
        cc_reply_timeout=30.0,
    )
    with federation:
        record_view = federation.run_to_completion(
            _federated_request(model_config, algorithm_doc, config, fold),
            timeout=1800.0,
        )
        experiment_id = record_view["experiment_id"]
        record = federation.server_record(experiment_id)
        if record is None or record.final_weights is None:
            raise RuntimeError(
                f"{method} fold {fold}: no final model ({record_view['status']})")
        aggregated = sum(1 for r in record.rounds if r.get("aggregated"))
        audit = {
            "job_requests": federation.broker.publish_count("job-requests"),
            "job_replies": federation.broker.publish_count("job-replies"),
        }
        if audit["job_requests"] < aggregated:
            raise RuntimeError("broker audit: fewer JobRequests than rounds")
        if audit["job_replies"] < aggregated * config.n_clients:
            raise RuntimeError("broker audit: fewer replies than aggregations need")
        final = evaluate(model_config, record.final_weights, test)
    return final, aggregated, audit


def run_comparison(config: BenchConfig, work_dir) -> dict:
    """All requested methods over all folds; returns the results document."""
    config.validate()
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    dataset, provenance = load_bench_data(config)
    folds = fold_membership(dataset.labels, config.folds,
                            derive_seed("bench-folds", config.seed))

    results: list[MethodResult] = []
    audits: dict[str, list[dict]] = {}
    for method in config.methods:
        fold_runs: list[FoldRun] = []
        for fold in range(config.folds):
            remainder, test = take_fold(dataset, folds, fold)
            shards = shard_among_clients(
                remainder, config.n_clients,
                derive_seed("bench-shards", config.seed, fold))
            model_config = bench_model_config(
                dataset.features.shape[1],
                derive_seed("bench-init", config.seed, fold), config)
            if method == "local":
                metrics, rounds = run_local(model_config, shards, test, config, fold)
            elif method == "centralized":
                metrics, rounds = run_centralized(model_config, remainder, test,
                                                  config, fold)
            else:
                metrics, rounds, audit = run_federated(
                    model_config, FEDERATED_ALGORITHMS[method], shards, test,
                    config, fold, method, work_dir / method / f"fold{fold}")
                audits.setdefault(method, []).append(audit)
            fold_runs.append(FoldRun(fold=fold, metrics=metrics, rounds_run=rounds))
        results.append(MethodResult(method=method, fold_runs=fold_runs))

    doc = {
        "data": provenance,
        "seed": config.seed,
        "folds": config.folds,
        "n_clients": config.n_clients,
        "budget": config.budget,
        "methods": [r.summary() for r in results],
        "per_fold": {
            r.method: [
                {"fold": fr.fold, "rounds_run": fr.rounds_run,
                 **{k: getattr(fr.metrics, k) for k in METRIC_KEYS}}
                for fr in r.fold_runs
            ]
            for r in results
        },
        "broker_audit": audits,
    }
    return doc


# --------------------------------------------------------------- reporting


def results_csv(doc: dict) -> str:
    buf = io.StringIO()
    fields = ["method"]
    for key in METRIC_KEYS:
        fields += [f"{key}_mean", f"{key}_std"]
    fields.append("rounds_mean")
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in doc["methods"]:
        writer.writerow({f: (f"{row[f]:.6f}" if f != "method" else row[f])
                         for f in fields})
    return buf.getvalue()


def results_markdown(doc: dict) -> str:
    lines = [
        "# Benchmark comparison",
        "",
        f"- data: {doc['data']}",
        f"- folds: {doc['folds']}, clients: {doc['n_clients']}, "
        f"budget: {doc['budget']} epochs/rounds, seed: {doc['seed']}",
        "",
        "| method | precision | recall | f1 | AUPRC (%) | rounds |",
        "|---|---|---|---|---|---|",
    ]
    for row in doc["methods"]:
        cells = [row["method"]]
        for key in ("precision", "recall", "f1"):
            cells.append(f"{row[f'{key}_mean']:.4f} ± {row[f'{key}_std']:.4f}")
        cells.append(f"{100 * row['auprc_mean']:.2f} ± {100 * row['auprc_std']:.2f}")
        cells.append(f"{row['rounds_mean']:.1f}")
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    return "\n".join(lines)


def write_reports(doc: dict, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    json_path = out_dir / "results.json"
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    paths.append(json_path)
    csv_path = out_dir / "results.csv"
    csv_path.write_text(results_csv(doc), encoding="utf-8")
    paths.append(csv_path)
    md_path = out_dir / "results.md"
    md_path.write_text(results_markdown(doc), encoding="utf-8")
    paths.append(md_path)
    return paths


def default_config(**overrides) -> BenchConfig:
    return replace(BenchConfig(), **overrides)
