"""Client node behavior against a scripted parameter server.

The broker is real; the server side is just this test publishing job
requests and draining the reply topics, which pins down the node's wire
behavior without any orchestration logic in the loop.
"""

from __future__ import annotations

import time

import pytest

from conftest import model_doc
from fedbus.client.loaders import (
    DataLoaderSpec,
    LoaderError,
    register_memory_dataset,
    resolve_loader,
)
from fedbus.client.node import ClientConfig, ClientNode
from fedbus.model.config import ModelConfig
from fedbus.model.data import synth_dataset
from fedbus.model.network import build_model
from fedbus.protocol.acl import (
    NodeIdentity,
    ROLE_OBSERVER,
    ROLE_PARAMETER_SERVER,
    ROLE_PARTICIPANT,
    standard_rules,
)
from fedbus.protocol.broker import EmbeddedBroker
from fedbus.protocol.codec import weights_from_doc, weights_to_doc
from fedbus.protocol.envelope import Envelope
from fedbus.protocol.topics import (
    MSG_JOB_ABORT,
    MSG_JOB_ACKNOWLEDGE,
    MSG_JOB_FAILED,
    MSG_JOB_REPLY,
    MSG_JOB_REQUEST,
    MSG_MODEL_REPLY,
    MSG_MODEL_REQUEST,
    TopicScheme,
)
from fedbus.protocol.topics import topic_for
from fedbus.runtime import LocalTransport, NodeRuntime

SCHEME = TopicScheme("fed/unit")
PS = "parameter-server"

_ROLE = {"participant": ROLE_PARTICIPANT, "observer": ROLE_OBSERVER}


class Harness:
    """Broker plus a scripted server-side view of the reply topics."""

    def __init__(self, configs: list[ClientConfig]):
        nodes = [NodeIdentity(PS, ROLE_PARAMETER_SERVER)]
        nodes += [NodeIdentity(c.client_id, _ROLE[c.role]) for c in configs]
        self.broker = EmbeddedBroker(nodes, standard_rules(SCHEME, nodes))
        self.replies = self.broker.subscribe(PS, SCHEME.absolute("job-replies/+"))
        self.model_requests = self.broker.subscribe(
            PS, SCHEME.absolute("model-requests/+")
        )
        self.nodes: dict[str, ClientNode] = {}
        for cfg in configs:
            identity = NodeIdentity(cfg.client_id, _ROLE[cfg.role])
            runtime = NodeRuntime(
                identity, SCHEME, LocalTransport(self.broker, cfg.client_id), 0.0
            )
            self.nodes[cfg.client_id] = ClientNode(runtime, cfg)

    def start(self) -> "Harness":
        for node in self.nodes.values():
            node.start()
        return self

    def stop(self) -> None:
        for node in self.nodes.values():
            node.stop()

    def __enter__(self) -> "Harness":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # ------------------------------------------------------- server script

    def publish(self, msg_type: str, eid: str, round_no: int, payload: dict,
                suffix: str | None = None) -> None:
        env = Envelope(msg_type=msg_type, sender_id=PS, experiment_id=eid,
                       round=round_no, payload=payload)
        topic = topic_for(SCHEME, msg_type, suffix)
        assert self.broker.publish(PS, topic, env.to_bytes())

    def send_job(self, eid: str, round_no: int, weights, *, epochs: int = 1,
                 post_eval: bool = True, allow_default: bool = True,
                 train_timeout: float = 30.0, batch_size: int = 8) -> None:
        self.publish(MSG_JOB_REQUEST, eid, round_no, {
            "model_config": model_doc(),
            "training": {"batch_size": batch_size, "epochs": epochs,
                         "learning_rate": 0.05, "rng_seed": 7},
            "algorithm": {"kind": "fedavg"},
            "pre_eval": False,
            "post_eval": post_eval,
            "train_timeout": train_timeout,
            "eval_timeout": 10.0,
            "allow_metrics_upload_default": allow_default,
            "rounds_total": round_no,
            "weights": weights_to_doc(weights),
        })

    def send_abort(self, eid: str, round_no: int) -> None:
        self.publish(MSG_JOB_ABORT, eid, round_no,
                     {"reason": "insufficient acknowledgements"})

    def recv(self, timeout: float = 5.0) -> Envelope | None:
        item = self.replies.receive(timeout=timeout)
        if item is None:
            return None
        return Envelope.from_bytes(item[1])

    def collect(self, n: int, timeout: float = 10.0) -> list[Envelope]:
        out: list[Envelope] = []
        deadline = time.monotonic() + timeout
        while len(out) < n and time.monotonic() < deadline:
            env = self.recv(timeout=0.2)
            if env is not None:
                out.append(env)
        return out


def participant(tmp_path, cid: str = "client-0", name: str | None = None,
                n_features: int = 8, seed: int = 1, **cfg) -> ClientConfig:
    name = name or f"unit/{cid}"
    full = synth_dataset(seed=seed, n_samples=60, prevalence=0.3,
                         n_features=n_features)
    register_memory_dataset(name, full, full)
    return ClientConfig(
        client_id=cid, role="participant",
        loader=DataLoaderSpec(kind="memory", path=name),
        artifact_root=str(tmp_path / cid), **cfg,
    )


def init_weights(seed: int = 11):
    return build_model(ModelConfig.from_doc(model_doc()), seed)


def test_ack_then_reply_payload(tmp_path):
    with Harness([participant(tmp_path)]) as h:
        h.send_job("exp-a", 1, init_weights(), epochs=2)
        envs = h.collect(2)
        assert [e.msg_type for e in envs] == [MSG_JOB_ACKNOWLEDGE, MSG_JOB_REPLY]
        assert all(e.sender_id == "client-0" and e.round == 1 for e in envs)

        reply = envs[1].payload
        assert reply["n_train_samples"] == 60
        assert reply["completed_epochs"] == 2
        assert reply["steps"] == 2 * 8  # 60 samples, batch 8
        assert reply["truncated"] is False
        assert "delta_c" not in reply  # fedavg carries no control variate
        assert set(reply["post_eval"]) >= {"loss", "auprc", "precision", "recall"}
        trained = weights_from_doc(reply["weights"])
        assert not trained.equal_bits(init_weights().astype("f64"))


def test_busy_node_does_not_ack_second_request(tmp_path):
    with Harness([participant(tmp_path)]) as h:
        h.send_job("exp-a", 1, init_weights(), epochs=100000, batch_size=4)
        ack = h.recv()
        assert ack is not None and ack.msg_type == MSG_JOB_ACKNOWLEDGE

        h.send_job("exp-a", 2, init_weights(), epochs=1)
        assert h.recv(timeout=0.6) is None, "busy node must stay silent"

        h.send_abort("exp-a", 1)
        h.nodes["client-0"].join_job(timeout=10.0)
        assert h.recv(timeout=0.6) is None, "aborted job must not reply"


def test_mismatched_abort_is_ignored(tmp_path):
    with Harness([participant(tmp_path)]) as h:
        h.send_job("exp-a", 1, init_weights(), epochs=300, batch_size=4)
        ack = h.recv()
        assert ack is not None and ack.msg_type == MSG_JOB_ACKNOWLEDGE

        h.send_abort("exp-a", 2)        # wrong round
        h.send_abort("exp-other", 1)    # wrong experiment
        env = h.recv(timeout=20.0)
        assert env is not None and env.msg_type == MSG_JOB_REPLY
        assert env.round == 1


def test_node_recovers_after_abort(tmp_path):
    with Harness([participant(tmp_path)]) as h:
        h.send_job("exp-a", 1, init_weights(), epochs=100000, batch_size=4)
        assert h.recv().msg_type == MSG_JOB_ACKNOWLEDGE
        h.send_abort("exp-a", 1)
        h.nodes["client-0"].join_job(timeout=10.0)

        h.send_job("exp-a", 2, init_weights(), epochs=1)
        envs = h.collect(2)
        assert [e.msg_type for e in envs] == [MSG_JOB_ACKNOWLEDGE, MSG_JOB_REPLY]
        assert envs[1].round == 2


@pytest.mark.parametrize(
    "node_consent,experiment_default,expect_metrics",
    [
        (False, True, False),   # node opt-out wins over the experiment
        (True, False, True),    # node opt-in wins too
        (None, False, False),   # unset: follow the experiment default
        (None, True, True),
    ],
)
def test_metrics_consent_gating(tmp_path, node_consent, experiment_default,
                                expect_metrics):
    cfg = participant(tmp_path, allow_metrics_upload=node_consent)
    with Harness([cfg]) as h:
        h.send_job("exp-a", 1, init_weights(), post_eval=True,
                   allow_default=experiment_default)
        envs = h.collect(2)
        assert envs[1].msg_type == MSG_JOB_REPLY
        assert ("post_eval" in envs[1].payload) is expect_metrics
        # The model update itself is never withheld.
        assert "weights" in envs[1].payload


def test_round_seed_separates_clients_but_stays_reproducible(tmp_path):
    # Both clients hold identical data; only the id-derived seed differs.
    full = synth_dataset(seed=9, n_samples=60, prevalence=0.3, n_features=8)
    register_memory_dataset("unit/shared", full, full)
    configs = [
        ClientConfig(client_id=cid, role="participant",
                     loader=DataLoaderSpec(kind="memory", path="unit/shared"),
                     artifact_root=str(tmp_path / cid))
        for cid in ("client-0", "client-1")
    ]
    with Harness(configs) as h:
        h.send_job("exp-a", 1, init_weights(), epochs=2)
        first = {e.sender_id: e.payload for e in h.collect(4)
                 if e.msg_type == MSG_JOB_REPLY}
        assert set(first) == {"client-0", "client-1"}
        w0 = weights_from_doc(first["client-0"]["weights"])
        w1 = weights_from_doc(first["client-1"]["weights"])
        assert not w0.equal_bits(w1)

        # Same round in a fresh experiment reproduces the same bits.
        h.send_job("exp-b", 1, init_weights(), epochs=2)
        second = {e.sender_id: e.payload for e in h.collect(4)
                  if e.msg_type == MSG_JOB_REPLY}
        assert weights_from_doc(second["client-0"]["weights"]).equal_bits(w0)
        assert weights_from_doc(second["client-1"]["weights"]).equal_bits(w1)


def test_incompatible_data_reports_failure(tmp_path):
    cfg = participant(tmp_path, n_features=5)  # model expects 8 inputs
    with Harness([cfg]) as h:
        h.send_job("exp-a", 1, init_weights())
        envs = h.collect(2)
        assert [e.msg_type for e in envs] == [MSG_JOB_ACKNOWLEDGE, MSG_JOB_FAILED]
        assert "input_dim" in envs[1].payload["reason"]


def test_status_returns_to_idle_after_job(tmp_path):
    with Harness([participant(tmp_path)]) as h:
        h.send_job("exp-a", 1, init_weights())
        assert h.collect(2)[1].msg_type == MSG_JOB_REPLY

        def status():
            retained = dict(h.broker.retained_snapshot())
            raw = retained.get(SCHEME.absolute("status-reports/client-0"))
            return None if raw is None else Envelope.from_bytes(raw)

        deadline = time.monotonic() + 5.0
        while time.monotonic() < deadline:
            env = status()
            if env is not None and env.payload["state"] == "IDLE" \
                    and env.experiment_id == "exp-a":
                break
            time.sleep(0.05)
        env = status()
        assert env.payload["state"] == "IDLE"
        assert env.experiment_id == "exp-a"
        assert env.payload["role"] == "client_participant"


def test_request_model_stores_final_weights(tmp_path):
    with Harness([participant(tmp_path)]) as h:
        node = h.nodes["client-0"]
        node.request_model("exp-done")

        item = h.model_requests.receive(timeout=5.0)
        assert item is not None
        topic, raw = item
        assert topic == SCHEME.absolute("model-requests/client-0")
        req = Envelope.from_bytes(raw)
        assert req.msg_type == MSG_MODEL_REQUEST
        assert req.experiment_id == "exp-done"

        final = init_weights(seed=23)
        h.publish(MSG_MODEL_REPLY, "exp-done", 4, {
            "weights": weights_to_doc(final),
            "model_config": model_doc(),
            "final": True,
            "reason": "completed",
        }, suffix="client-0")

        path = tmp_path / "client-0" / "experiments" / "exp-done" / "final.weights"
        deadline = time.monotonic() + 5.0
        while not path.exists() and time.monotonic() < deadline:
            time.sleep(0.05)
        assert path.exists()

        from fedbus.protocol.codec import read_weights_file
        assert read_weights_file(path).equal_bits(final)


def test_error_model_reply_writes_nothing(tmp_path):
    with Harness([participant(tmp_path)]) as h:
        h.publish(MSG_MODEL_REPLY, "exp-gone", 0, {"error": "unknown experiment"},
                  suffix="client-0")
        time.sleep(0.3)
        assert not (tmp_path / "client-0" / "experiments" / "exp-gone").exists()


def test_participant_requires_training_data(tmp_path):
    register_memory_dataset("unit/eval-only", None,
                            synth_dataset(seed=2, n_samples=40, prevalence=0.3,
                                          n_features=8))
    spec = DataLoaderSpec(kind="memory", path="unit/eval-only")
    with pytest.raises(LoaderError, match="empty training split"):
        resolve_loader(spec)
    # Observers resolve the same spec fine.
    data = resolve_loader(spec, require_train=False)
    assert data.train is None and len(data.eval) == 40


def test_loader_spec_errors():
    with pytest.raises(LoaderError, match="no registered dataset"):
        resolve_loader(DataLoaderSpec(kind="memory", path="unit/nope"))
    with pytest.raises(LoaderError, match="unknown loader kind"):
        resolve_loader(DataLoaderSpec(kind="parquet", path="x"))
    with pytest.raises(LoaderError, match="requires a path"):
        resolve_loader(DataLoaderSpec(kind="csv", path=None))
    with pytest.raises(LoaderError, match="unknown schema"):
        resolve_loader(DataLoaderSpec(kind="csv", path="x.csv", schema="imaging"))
    with pytest.raises(LoaderError, match="unknown loader fields"):
        DataLoaderSpec.from_doc({"kind": "memory", "path": "x", "shuffle": True})


def test_synthetic_loader_splits():
    spec = DataLoaderSpec(kind="synthetic", n_samples=200, prevalence=0.25,
                          n_features=6, synth_seed=4, eval_fraction=0.25)
    data = resolve_loader(spec)
    assert len(data.train) + len(data.eval) == 200
    assert len(data.eval) == 50
    assert data.train.features.shape[1] == 6
    doc = spec.to_doc()
    assert DataLoaderSpec.from_doc(doc) == spec
