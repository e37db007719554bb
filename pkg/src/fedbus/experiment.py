"""Experiment schema: the one validator both the control center and the
parameter server run against incoming experiment documents.

An experiment request is a JSON object {model_config, settings}. Validation
returns data, not exceptions, with JSON-pointer-like error paths such as
"settings/algorithm/mu" so a client can map errors back onto form fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .algorithms import ALGORITHM_KINDS, AlgorithmParams
from .model.config import (
    ACTIVATIONS,
    ModelConfig,
    TrainingSettings,
)

ACK_TIMEOUT_DEFAULT = 30.0
TRAIN_TIMEOUT_DEFAULT = 600.0
EVAL_TIMEOUT_DEFAULT = 60.0
ROUND_GRACE_SECONDS = 10.0

_SETTINGS_FIELDS = {
    "rounds",
    "min_replies",
    "ack_timeout",
    "train_timeout",
    "eval_timeout",
    "pre_eval",
    "post_eval",
    "allow_metrics_upload_default",
    "algorithm",
    "training",
    "controllers",
}

_MODEL_FIELDS = {"input_dim", "layers", "output_activation", "seed_policy", "init_seed"}
_LAYER_FIELDS = {"units", "activation", "dropout_rate"}
_ALGO_FIELDS = {"kind", "mu", "retained_fraction", "server_step", "local_lr"}
_TRAINING_FIELDS = {
    "batch_size",
    "epochs",
    "loss",
    "optimizer",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "class_threshold",
    "rng_seed",
}
_CONTROLLER_FIELDS = {"plateau", "early_stop"}
_PLATEAU_FIELDS = {"patience", "factor", "min_delta"}
_STOP_FIELDS = {"patience"}


@dataclass
class ValidationReport:
    errors: list[dict] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors

    def add(self, path: str, message: str) -> None:
        self.errors.append({"path": path, "message": message})

    def to_doc(self) -> dict:
        return {"valid": self.valid, "errors": list(self.errors)}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (_is_int(v) or isinstance(v, float)) and math.isfinite(v)


def _check_unknown(report: ValidationReport, doc: dict, known: set, prefix: str) -> None:
    for key in sorted(set(doc) - known):
        report.add(f"{prefix}/{key}", "unknown field")


def _validate_model_config(report: ValidationReport, doc) -> None:
    if not isinstance(doc, dict):
        report.add("model_config", "must be an object")
        return
    _check_unknown(report, doc, _MODEL_FIELDS, "model_config")
    dim = doc.get("input_dim")
    if dim is None:
        report.add("model_config/input_dim", "required")
    elif not _is_int(dim) or dim < 1:
        report.add("model_config/input_dim", "must be an integer >= 1")
    layers = doc.get("layers")
    if layers is None:
        report.add("model_config/layers", "required")
    elif not isinstance(layers, list) or not layers:
        report.add("model_config/layers", "must be a non-empty list")
    else:
        for i, layer in enumerate(layers):
            base = f"model_config/layers/{i}"
            if not isinstance(layer, dict):
                report.add(base, "must be an object")
                continue
            _check_unknown(report, layer, _LAYER_FIELDS, base)
            units = layer.get("units")
            if units is None:
                report.add(f"{base}/units", "required")
            elif not _is_int(units) or units < 1:
                report.add(f"{base}/units", "must be an integer >= 1")
            act = layer.get("activation", "tanh")
            if act not in ACTIVATIONS:
                report.add(f"{base}/activation", f"must be one of {sorted(ACTIVATIONS)}")
            rate = layer.get("dropout_rate", 0.0)
            if not _is_num(rate) or not (0.0 <= rate < 1.0):
                report.add(f"{base}/dropout_rate", "must be in [0, 1)")
    out_act = doc.get("output_activation", "sigmoid")
    if out_act != "sigmoid":
        report.add("model_config/output_activation", "only sigmoid output is supported")
    policy = doc.get("seed_policy", "explicit")
    if policy not in ("explicit", "derived"):
        report.add("model_config/seed_policy", "must be explicit or derived")
    seed = doc.get("init_seed")
    if policy == "explicit":
        if seed is None:
            report.add("model_config/init_seed", "required when seed_policy is explicit")
        elif not _is_int(seed) or seed < 0:
            report.add("model_config/init_seed", "must be an integer >= 0")
    elif seed is not None and (not _is_int(seed) or seed < 0):
        report.add("model_config/init_seed", "must be an integer >= 0")


def _validate_algorithm(report: ValidationReport, doc) -> None:
    if not isinstance(doc, dict):
        report.add("settings/algorithm", "must be an object")
        return
    _check_unknown(report, doc, _ALGO_FIELDS, "settings/algorithm")
    kind = doc.get("kind")
    if kind is None:
        report.add("settings/algorithm/kind", "required")
        return
    if kind not in ALGORITHM_KINDS:
        report.add("settings/algorithm/kind", f"must be one of {sorted(ALGORITHM_KINDS)}")
        return
    mu = doc.get("mu")
    if kind in ("fedprox", "feddyn"):
        if mu is None:
            report.add("settings/algorithm/mu", f"required for {kind}")
        elif not _is_num(mu) or mu <= 0:
            report.add("settings/algorithm/mu", f"must be > 0 for {kind}")
    elif mu is not None and (not _is_num(mu) or mu < 0):
        report.add("settings/algorithm/mu", "must be >= 0")
    rho = doc.get("retained_fraction", 0.0)
    if not _is_num(rho) or not (0.0 <= rho < 1.0):
        report.add("settings/algorithm/retained_fraction", "must be in [0, 1)")
    step = doc.get("server_step", 1.0)
    if not _is_num(step) or step <= 0:
        report.add("settings/algorithm/server_step", "must be > 0")
    local_lr = doc.get("local_lr")
    if kind == "scaffold":
        if local_lr is None:
            report.add("settings/algorithm/local_lr", "required for scaffold")
        elif not _is_num(local_lr) or local_lr <= 0:
            report.add("settings/algorithm/local_lr", "must be > 0")
    elif local_lr is not None and (not _is_num(local_lr) or local_lr <= 0):
        report.add("settings/algorithm/local_lr", "must be > 0")


def _validate_training(report: ValidationReport, doc) -> None:
    if doc is None:
        return
    if not isinstance(doc, dict):
        report.add("settings/training", "must be an object")
        return
    _check_unknown(report, doc, _TRAINING_FIELDS, "settings/training")

    def positive_int(name: str) -> None:
        v = doc.get(name)
        if v is not None and (not _is_int(v) or v < 1):
            report.add(f"settings/training/{name}", "must be an integer >= 1")

    positive_int("batch_size")
    positive_int("epochs")
    if doc.get("loss", "binary_cross_entropy") != "binary_cross_entropy":
        report.add("settings/training/loss", "only binary_cross_entropy is supported")
    if doc.get("optimizer", "adam") not in ("adam", "sgd"):
        report.add("settings/training/optimizer", "must be adam or sgd")
    lr = doc.get("learning_rate")
    if lr is not None and (not _is_num(lr) or lr <= 0):
        report.add("settings/training/learning_rate", "must be > 0")
    for name in ("adam_beta1", "adam_beta2"):
        v = doc.get(name)
        if v is not None and (not _is_num(v) or not (0.0 < v < 1.0)):
            report.add(f"settings/training/{name}", "must be in (0, 1)")
    eps = doc.get("adam_epsilon")
    if eps is not None and (not _is_num(eps) or eps <= 0):
        report.add("settings/training/adam_epsilon", "must be > 0")
    thr = doc.get("class_threshold")
    if thr is not None and (not _is_num(thr) or not (0.0 < thr < 1.0)):
        report.add("settings/training/class_threshold", "must be in (0, 1)")
    seed = doc.get("rng_seed")
    if seed is not None and (not _is_int(seed) or seed < 0):
        report.add("settings/training/rng_seed", "must be an integer >= 0")


def _validate_controllers(report: ValidationReport, doc, post_eval) -> None:
    if doc is None:
        return
    if not isinstance(doc, dict):
        report.add("settings/controllers", "must be an object")
        return
    _check_unknown(report, doc, _CONTROLLER_FIELDS, "settings/controllers")
    enabled = False
    plateau = doc.get("plateau")
    if plateau is not None:
        if not isinstance(plateau, dict):
            report.add("settings/controllers/plateau", "must be an object")
        else:
            enabled = True
            _check_unknown(report, plateau, _PLATEAU_FIELDS, "settings/controllers/plateau")
            patience = plateau.get("patience")
            if patience is None:
                report.add("settings/controllers/plateau/patience", "required")
            elif not _is_int(patience) or patience < 1:
                report.add("settings/controllers/plateau/patience", "must be an integer >= 1")
            factor = plateau.get("factor", 0.5)
            if not _is_num(factor) or not (0.0 < factor < 1.0):
                report.add("settings/controllers/plateau/factor", "must be in (0, 1)")
            delta = plateau.get("min_delta", 1e-4)
            if not _is_num(delta) or delta < 0:
                report.add("settings/controllers/plateau/min_delta", "must be >= 0")
    stop = doc.get("early_stop")
    if stop is not None:
        if not isinstance(stop, dict):
            report.add("settings/controllers/early_stop", "must be an object")
        else:
            enabled = True
            _check_unknown(report, stop, _STOP_FIELDS, "settings/controllers/early_stop")
            patience = stop.get("patience")
            if patience is None:
                report.add("settings/controllers/early_stop/patience", "required")
            elif not _is_int(patience) or patience < 1:
                report.add("settings/controllers/early_stop/patience", "must be an integer >= 1")
    if enabled and post_eval is False:
        report.add("settings/post_eval", "must be true when controllers are enabled")


def validate_experiment(doc, n_participants: int | None = None) -> ValidationReport:
    """Structural and conditional validation; pure, errors as data.

    ``n_participants`` adds the deployment-dependent quorum check; schema
    checks are identical with or without it.
    """
    report = ValidationReport()
    if not isinstance(doc, dict):
        report.add("", "request must be a JSON object")
        return report
    _check_unknown(report, doc, {"model_config", "settings"}, "")
    if "model_config" not in doc:
        report.add("model_config", "required")
    else:
        _validate_model_config(report, doc["model_config"])
    settings = doc.get("settings")
    if settings is None:
        report.add("settings", "required")
        return report
    if not isinstance(settings, dict):
        report.add("settings", "must be an object")
        return report
    _check_unknown(report, settings, _SETTINGS_FIELDS, "settings")

    rounds = settings.get("rounds")
    if rounds is None:
        report.add("settings/rounds", "required")
    elif not _is_int(rounds) or rounds < 1:
        report.add("settings/rounds", "must be an integer >= 1")
    min_replies = settings.get("min_replies")
    if min_replies is None:
        report.add("settings/min_replies", "required")
    elif not _is_int(min_replies) or min_replies < 1:
        report.add("settings/min_replies", "must be an integer >= 1")
    elif n_participants is not None and min_replies > n_participants:
        report.add(
            "settings/min_replies",
            f"exceeds the {n_participants} registered participants",
        )
    for name, default in (
        ("ack_timeout", ACK_TIMEOUT_DEFAULT),
        ("train_timeout", TRAIN_TIMEOUT_DEFAULT),
        ("eval_timeout", EVAL_TIMEOUT_DEFAULT),
    ):
        v = settings.get(name, default)
        if not _is_num(v) or v <= 0:
            report.add(f"settings/{name}", "must be a positive number of seconds")
    for name in ("pre_eval", "post_eval", "allow_metrics_upload_default"):
        v = settings.get(name)
        if v is not None and not isinstance(v, bool):
            report.add(f"settings/{name}", "must be a boolean")
    if "algorithm" not in settings:
        report.add("settings/algorithm", "required")
    else:
        _validate_algorithm(report, settings["algorithm"])
    _validate_training(report, settings.get("training"))
    _validate_controllers(report, settings.get("controllers"), settings.get("post_eval", True))
    return report


@dataclass(frozen=True)
class ControllerSettings:
    plateau_patience: int | None = None
    plateau_factor: float = 0.5
    plateau_min_delta: float = 1e-4
    stop_patience: int | None = None

    @property
    def enabled(self) -> bool:
        return self.plateau_patience is not None or self.stop_patience is not None

    def to_doc(self) -> dict | None:
        if not self.enabled:
            return None
        doc: dict = {}
        if self.plateau_patience is not None:
            doc["plateau"] = {
                "patience": self.plateau_patience,
                "factor": self.plateau_factor,
                "min_delta": self.plateau_min_delta,
            }
        if self.stop_patience is not None:
            doc["early_stop"] = {"patience": self.stop_patience}
        return doc

    @classmethod
    def from_doc(cls, doc: dict | None) -> "ControllerSettings":
        if not doc:
            return cls()
        plateau = doc.get("plateau") or {}
        stop = doc.get("early_stop") or {}
        return cls(
            plateau_patience=plateau.get("patience"),
            plateau_factor=float(plateau.get("factor", 0.5)),
            plateau_min_delta=float(plateau.get("min_delta", 1e-4)),
            stop_patience=stop.get("patience"),
        )


@dataclass(frozen=True)
class ExperimentSpec:
    experiment_id: str
    model_config: ModelConfig
    rounds: int
    min_replies: int
    algorithm: AlgorithmParams
    training: TrainingSettings
    ack_timeout: float = ACK_TIMEOUT_DEFAULT
    train_timeout: float = TRAIN_TIMEOUT_DEFAULT
    eval_timeout: float = EVAL_TIMEOUT_DEFAULT
    pre_eval: bool = False
    post_eval: bool = True
    allow_metrics_upload_default: bool = True
    controllers: ControllerSettings = ControllerSettings()

    def round_deadline_seconds(self) -> float:
        extra = (self.eval_timeout if self.pre_eval else 0.0) + (
            self.eval_timeout if self.post_eval else 0.0
        )
        return self.train_timeout + extra + ROUND_GRACE_SECONDS

    def request_doc(self) -> dict:
        settings = {
            "rounds": self.rounds,
            "min_replies": self.min_replies,
            "ack_timeout": self.ack_timeout,
            "train_timeout": self.train_timeout,
            "eval_timeout": self.eval_timeout,
            "pre_eval": self.pre_eval,
            "post_eval": self.post_eval,
            "allow_metrics_upload_default": self.allow_metrics_upload_default,
            "algorithm": self.algorithm.to_doc(),
            "training": self.training.to_doc(),
        }
        controllers = self.controllers.to_doc()
        if controllers is not None:
            settings["controllers"] = controllers
        return {"model_config": self.model_config.to_doc(), "settings": settings}

    def to_doc(self) -> dict:
        doc = self.request_doc()
        doc["experiment_id"] = self.experiment_id
        return doc

    @classmethod
    def from_request(cls, experiment_id: str, doc: dict) -> "ExperimentSpec":
        """Build from a request document that already passed validation."""
        settings = doc["settings"]
        return cls(
            experiment_id=experiment_id,
            model_config=ModelConfig.from_doc(doc["model_config"]),
            rounds=settings["rounds"],
            min_replies=settings["min_replies"],
            ack_timeout=float(settings.get("ack_timeout", ACK_TIMEOUT_DEFAULT)),
            train_timeout=float(settings.get("train_timeout", TRAIN_TIMEOUT_DEFAULT)),
            eval_timeout=float(settings.get("eval_timeout", EVAL_TIMEOUT_DEFAULT)),
            pre_eval=settings.get("pre_eval", False),
            post_eval=settings.get("post_eval", True),
            allow_metrics_upload_default=settings.get("allow_metrics_upload_default", True),
            algorithm=AlgorithmParams.from_doc(settings["algorithm"]),
            training=TrainingSettings.from_doc(settings.get("training", {})),
            controllers=ControllerSettings.from_doc(settings.get("controllers")),
        )

    @classmethod
    def from_doc(cls, doc: dict) -> "ExperimentSpec":
        return cls.from_request(doc["experiment_id"], doc)
