"""Model architecture and local-training settings, with canonical JSON forms."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

ACTIVATIONS = ("tanh", "relu", "sigmoid", "linear")
SEED_POLICIES = ("explicit", "derived")
LOSSES = ("binary_cross_entropy",)
OPTIMIZERS = ("adam", "sgd")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LayerConfig:
    units: int
    activation: str = "tanh"
    dropout_rate: float = 0.0


@dataclass(frozen=True)
class ModelConfig:
    """Dense binary classifier: hidden layers plus an implicit 1-unit sigmoid output.

    ``seed_policy`` decides where the init seed comes from: "explicit" uses
    ``init_seed``, "derived" lets the coordinator derive one per experiment.
    """

    input_dim: int
    layers: tuple[LayerConfig, ...]
    output_activation: str = "sigmoid"
    seed_policy: str = "explicit"
    init_seed: int = 0

    def validate(self) -> None:
        if self.input_dim <= 0:
            raise ConfigError(f"input_dim must be positive, got {self.input_dim}")
        if not self.layers:
            raise ConfigError("at least one hidden layer is required")
        for i, layer in enumerate(self.layers):
            if layer.units <= 0:
                raise ConfigError(f"layers/{i}/units must be positive, got {layer.units}")
            if layer.activation not in ACTIVATIONS:
                raise ConfigError(f"layers/{i}/activation unknown: {layer.activation!r}")
            if not (0.0 <= layer.dropout_rate < 1.0):
                raise ConfigError(f"layers/{i}/dropout_rate must be in [0,1)")
        if self.output_activation != "sigmoid":
            raise ConfigError(f"output_activation must be 'sigmoid', got {self.output_activation!r}")
        if self.seed_policy not in SEED_POLICIES:
            raise ConfigError(f"seed_policy unknown: {self.seed_policy!r}")

    def to_doc(self) -> dict:
        doc = asdict(self)
        doc["layers"] = [asdict(l) for l in self.layers]
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "ModelConfig":
        if not isinstance(doc, dict):
            raise ConfigError("model config must be a JSON object")
        allowed = {"input_dim", "layers", "output_activation", "seed_policy", "init_seed"}
        unknown = set(doc) - allowed
        if unknown:
            raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
        raw_layers = doc.get("layers")
        if not isinstance(raw_layers, list):
            raise ConfigError("layers must be a list")
        layers = []
        for i, raw in enumerate(raw_layers):
            if not isinstance(raw, dict):
                raise ConfigError(f"layers/{i} must be an object")
            extra = set(raw) - {"units", "activation", "dropout_rate"}
            if extra:
                raise ConfigError(f"layers/{i}: unknown fields {sorted(extra)}")
            layers.append(
                LayerConfig(
                    units=int(raw.get("units", 0)),
                    activation=raw.get("activation", "tanh"),
                    dropout_rate=float(raw.get("dropout_rate", 0.0)),
                )
            )
        cfg = cls(
            input_dim=int(doc.get("input_dim", 0)),
            layers=tuple(layers),
            output_activation=doc.get("output_activation", "sigmoid"),
            seed_policy=doc.get("seed_policy", "explicit"),
            init_seed=int(doc.get("init_seed", 0)),
        )
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class TrainingSettings:
    batch_size: int = 32
    epochs: int = 1
    loss: str = "binary_cross_entropy"
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-7
    class_threshold: float = 0.5
    rng_seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.loss not in LOSSES:
            raise ConfigError(f"loss unknown: {self.loss!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer unknown: {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not (0.0 < self.class_threshold < 1.0):
            raise ConfigError("class_threshold must be in (0,1)")

    def to_doc(self) -> dict:
        return asdict(self)

    @classmethod
    def from_doc(cls, doc: dict) -> "TrainingSettings":
        allowed = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - allowed
        if unknown:
            raise ConfigError(f"unknown training fields: {sorted(unknown)}")
        settings = cls(**doc)
        settings.validate()
        return settings

    def with_learning_rate(self, lr: float) -> "TrainingSettings":
        return TrainingSettings(**{**asdict(self), "learning_rate": lr})
