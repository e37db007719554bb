"""Federated aggregation strategies and their client-side counterparts.

Four strategies share one interface: a gradient modifier applied during local
training, a finalization step that updates per-client algorithm state after
training, and a server-side aggregation rule. All functions here are pure;
state objects are replaced, never mutated, so a round can be replayed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .model.metrics import EvalMetrics
from .model.network import GradientModifier
from .model.tensors import ModelWeights, weighted_sum

ALGORITHM_KINDS = ("fedavg", "fedprox", "feddyn", "scaffold")


class AlgorithmError(ValueError):
    pass


@dataclass(frozen=True)
class AlgorithmParams:
    """Strategy selector plus its coefficients.

    mu: proximal / regularization coefficient (fedprox, feddyn).
    retained_fraction: portion of the previous global model mixed back in
      after averaging (fedavg, fedprox).
    server_step: global step size for the scaffold server update.
    local_lr: learning rate assumed by the scaffold control-variate update.
    """

    kind: str
    mu: float = 0.0
    retained_fraction: float = 0.0
    server_step: float = 1.0
    local_lr: float = 1e-3

    def validate(self) -> None:
        if self.kind not in ALGORITHM_KINDS:
            raise AlgorithmError(f"unknown algorithm kind {self.kind!r}")
        if self.mu < 0:
            raise AlgorithmError("mu must be >= 0")
        if not (0.0 <= self.retained_fraction < 1.0):
            raise AlgorithmError("retained_fraction must be in [0, 1)")
        if self.server_step <= 0:
            raise AlgorithmError("server_step must be positive")
        if self.kind == "feddyn" and self.mu <= 0:
            raise AlgorithmError("feddyn requires mu > 0")
        if self.kind == "scaffold" and self.local_lr <= 0:
            raise AlgorithmError("scaffold requires local_lr > 0")

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "mu": self.mu,
            "retained_fraction": self.retained_fraction,
            "server_step": self.server_step,
            "local_lr": self.local_lr,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "AlgorithmParams":
        if not isinstance(doc, dict):
            raise AlgorithmError("algorithm settings must be an object")
        known = {"kind", "mu", "retained_fraction", "server_step", "local_lr"}
        unknown = set(doc) - known
        if unknown:
            raise AlgorithmError(f"unknown algorithm fields {sorted(unknown)}")
        if "kind" not in doc:
            raise AlgorithmError("algorithm settings require a kind")
        params = cls(
            kind=doc["kind"],
            mu=float(doc.get("mu", 0.0)),
            retained_fraction=float(doc.get("retained_fraction", 0.0)),
            server_step=float(doc.get("server_step", 1.0)),
            local_lr=float(doc.get("local_lr", 1e-3)),
        )
        params.validate()
        return params


@dataclass(frozen=True)
class ServerAggState:
    """Accumulators the server carries between rounds."""

    round: int
    n_clients_total: int
    feddyn_h: ModelWeights
    scaffold_c: ModelWeights

    @classmethod
    def init(cls, structure: ModelWeights, n_clients_total: int) -> "ServerAggState":
        return cls(
            round=0,
            n_clients_total=n_clients_total,
            feddyn_h=structure.zeros_like(),
            scaffold_c=structure.zeros_like(),
        )


@dataclass(frozen=True)
class ClientAlgState:
    """Per-client state that persists across rounds of one experiment."""

    scaffold_c_i: ModelWeights
    feddyn_g_k: ModelWeights

    @classmethod
    def init(cls, structure: ModelWeights) -> "ClientAlgState":
        return cls(scaffold_c_i=structure.zeros_like(), feddyn_g_k=structure.zeros_like())


@dataclass(frozen=True)
class ClientUpdate:
    client_id: str
    new_weights: ModelWeights
    n_train_samples: int
    delta_c: ModelWeights | None = None
    post_eval: EvalMetrics | None = None
    pre_eval: EvalMetrics | None = None

    def __post_init__(self):
        if self.n_train_samples < 1:
            raise AlgorithmError("n_train_samples must be >= 1")


def _identity_modifier(weights: ModelWeights, grads: ModelWeights) -> ModelWeights:
    return grads


def make_modifier(
    params: AlgorithmParams,
    global_weights: ModelWeights,
    client_state: ClientAlgState,
    server_control: ModelWeights | None = None,
) -> GradientModifier:
    """Per-batch additive gradient transform for local training.

    fedavg: identity. fedprox: g + mu*(w - global). scaffold: g - c_i + c,
    where c is the server control variate delivered with the job request.
    feddyn: g - g_k + mu*(w - global).

    fedprox with mu=0 returns the same identity as fedavg so the two
    strategies produce bit-identical trajectories.
    """
    client_state.scaffold_c_i.require_same_structure(global_weights, "client state")
    if params.kind == "fedavg":
        return _identity_modifier
    if params.kind == "fedprox":
        if params.mu == 0.0:
            return _identity_modifier
        anchor = global_weights
        mu = params.mu

        def prox(weights: ModelWeights, grads: ModelWeights) -> ModelWeights:
            return grads.add(weights.sub(anchor).scale(mu))

        return prox
    if params.kind == "scaffold":
        c = server_control if server_control is not None else global_weights.zeros_like()
        c.require_same_structure(global_weights, "server control")
        correction = c.sub(client_state.scaffold_c_i)

        def scaffold(weights: ModelWeights, grads: ModelWeights) -> ModelWeights:
            return grads.add(correction)

        return scaffold
    if params.kind == "feddyn":
        client_state.feddyn_g_k.require_same_structure(global_weights, "gradient state")
        anchor = global_weights
        g_k = client_state.feddyn_g_k
        mu = params.mu

        def dyn(weights: ModelWeights, grads: ModelWeights) -> ModelWeights:
            return grads.sub(g_k).add(weights.sub(anchor).scale(mu))

        return dyn
    raise AlgorithmError(f"unknown algorithm kind {params.kind!r}")


def finalize_client_update(
    params: AlgorithmParams,
    global_weights: ModelWeights,
    trained_weights: ModelWeights,
    client_state: ClientAlgState,
    k_steps: int,
    server_control: ModelWeights | None = None,
) -> tuple[ModelWeights | None, ClientAlgState]:
    """Post-training state transition; returns (delta_c or None, new state).

    scaffold: c_i' = c_i - c + (global - trained) / (k_steps * local_lr),
    delta_c = c_i' - c_i. feddyn: g_k' = g_k - mu*(trained - global).
    fedavg / fedprox leave the state untouched.
    """
    trained_weights.require_same_structure(global_weights, "trained weights")
    if params.kind in ("fedavg", "fedprox"):
        return None, client_state
    if params.kind == "scaffold":
        if k_steps < 1:
            raise AlgorithmError("scaffold control update needs at least one optimizer step")
        c = server_control if server_control is not None else global_weights.zeros_like()
        displacement = global_weights.sub(trained_weights).scale(1.0 / (k_steps * params.local_lr))
        c_i_new = client_state.scaffold_c_i.sub(c).add(displacement)
        delta_c = c_i_new.sub(client_state.scaffold_c_i)
        return delta_c, replace(client_state, scaffold_c_i=c_i_new)
    if params.kind == "feddyn":
        g_k_new = client_state.feddyn_g_k.sub(trained_weights.sub(global_weights).scale(params.mu))
        return None, replace(client_state, feddyn_g_k=g_k_new)
    raise AlgorithmError(f"unknown algorithm kind {params.kind!r}")


def aggregate(
    params: AlgorithmParams,
    prev_global: ModelWeights,
    updates: list[ClientUpdate],
    state: ServerAggState,
) -> tuple[ModelWeights, ServerAggState]:
    """Fold client updates into a new global model; pure in all arguments.

    Updates are processed in client_id order so the result does not depend
    on reply arrival order.
    """
    if not updates:
        raise AlgorithmError("aggregate requires at least one update")
    updates = sorted(updates, key=lambda u: u.client_id)
    for u in updates:
        u.new_weights.require_same_structure(prev_global, f"update from {u.client_id}")
        if params.kind == "scaffold" and u.delta_c is None:
            raise AlgorithmError(f"scaffold update from {u.client_id} missing delta_c")
        if params.kind != "scaffold" and u.delta_c is not None:
            raise AlgorithmError(f"unexpected delta_c from {u.client_id}")

    s = len(updates)
    n_total = state.n_clients_total
    next_round = state.round + 1

    if params.kind in ("fedavg", "fedprox"):
        total = sum(u.n_train_samples for u in updates)
        mean = weighted_sum(
            [u.new_weights for u in updates],
            [u.n_train_samples / total for u in updates],
        )
        rho = params.retained_fraction
        if rho > 0.0:
            new_global = weighted_sum([prev_global, mean], [rho, 1.0 - rho])
        else:
            new_global = mean
        return new_global, replace(state, round=next_round)

    if params.kind == "scaffold":
        mean_drift = weighted_sum(
            [u.new_weights.sub(prev_global) for u in updates], [1.0 / s] * s
        )
        new_global = prev_global.add(mean_drift.scale(params.server_step))
        mean_delta = weighted_sum([u.delta_c for u in updates], [1.0 / s] * s)
        new_c = state.scaffold_c.add(mean_delta.scale(s / n_total))
        return new_global, replace(state, round=next_round, scaffold_c=new_c)

    if params.kind == "feddyn":
        drift_sum = weighted_sum(
            [u.new_weights.sub(prev_global) for u in updates], [1.0] * s
        )
        new_h = state.feddyn_h.sub(drift_sum.scale(params.mu / n_total))
        mean_weights = weighted_sum([u.new_weights for u in updates], [1.0 / s] * s)
        new_global = mean_weights.sub(new_h.scale(1.0 / params.mu))
        return new_global, replace(state, round=next_round, feddyn_h=new_h)

    raise AlgorithmError(f"unknown algorithm kind {params.kind!r}")


def weighted_metric_mean(values: list[float], weights: list[int]) -> float:
    """Sample-count-weighted mean of per-client metrics."""
    if len(values) != len(weights):
        raise AlgorithmError("values and weights must align")
    total = sum(weights)
    if total <= 0:
        raise AlgorithmError("total weight must be positive")
    return sum(v * n for v, n in zip(values, weights)) / total
