"""Client node agent.

Message handling stays on the runtime's dispatch thread; training runs on a
worker thread that polls a cancellation flag at batch boundaries so a
JobAbort takes effect within one batch. One job at a time: a busy node simply
does not acknowledge, which the server's quorum already accounts for.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..algorithms import (
    AlgorithmError,
    AlgorithmParams,
    ClientAlgState,
    finalize_client_update,
    make_modifier,
)
from ..model.config import ModelConfig, TrainingSettings
from ..model.metrics import evaluate
from ..model.tensors import StructureMismatch
from ..model.training import TrainingFailure, derive_seed, train_local
from ..protocol.codec import (
    CodecError,
    weights_from_doc,
    weights_to_doc,
    write_weights_file,
)
from ..protocol.envelope import Envelope
from ..protocol.topics import (
    MSG_JOB_ABORT,
    MSG_JOB_ACKNOWLEDGE,
    MSG_JOB_FAILED,
    MSG_JOB_REPLY,
    MSG_JOB_REQUEST,
    MSG_MODEL_REPLY,
    MSG_MODEL_REQUEST,
    T_JOB_REQUESTS,
    T_MODEL_REPLIES,
)
from ..runtime import NodeRuntime
from .loaders import DataLoaderSpec, LoaderError, resolve_loader

log = logging.getLogger(__name__)

STATE_IDLE = "IDLE"
STATE_TRAINING = "TRAINING"
STATE_EVALUATING = "EVALUATING"


@dataclass(frozen=True)
class ClientConfig:
    client_id: str
    role: str  # participant | observer
    loader: DataLoaderSpec
    allow_metrics_upload: bool | None = None  # None: follow the experiment default
    artifact_root: str = "."

    def __post_init__(self):
        if self.role not in ("participant", "observer"):
            raise ValueError(f"role must be participant or observer, got {self.role!r}")


@dataclass
class _Job:
    experiment_id: str
    round: int
    cancel: threading.Event = field(default_factory=threading.Event)


class ClientNode:
    def __init__(self, runtime: NodeRuntime, config: ClientConfig):
        self.runtime = runtime
        self.config = config
        self.data = resolve_loader(config.loader, require_train=config.role == "participant")
        self.artifact_root = Path(config.artifact_root)
        self._job: _Job | None = None
        self._job_lock = threading.Lock()
        self._worker: threading.Thread | None = None
        self._alg_experiment: str | None = None
        self._alg_state: ClientAlgState | None = None
        runtime.handler = self._handle

    def start(self) -> None:
        if self.config.role == "participant":
            self.runtime.subscribe(T_JOB_REQUESTS)
        self.runtime.subscribe(T_MODEL_REPLIES)
        self.runtime.subscribe(f"{T_MODEL_REPLIES}/{self.config.client_id}")
        self.runtime.start()
        self.runtime.set_status(STATE_IDLE)

    def stop(self) -> None:
        self._cancel_active()
        worker = self._worker
        if worker is not None:
            worker.join(timeout=5.0)
        self.runtime.stop()

    def join_job(self, timeout: float = 60.0) -> None:
        worker = self._worker
        if worker is not None:
            worker.join(timeout=timeout)

    # ------------------------------------------------------------- intake

    def _handle(self, topic: str, env: Envelope) -> None:
        if env.msg_type == MSG_JOB_REQUEST:
            self._on_job_request(env)
        elif env.msg_type == MSG_JOB_ABORT:
            self._on_job_abort(env)
        elif env.msg_type == MSG_MODEL_REPLY:
            self._on_model_reply(env)

    def _on_job_request(self, env: Envelope) -> None:
        if self.config.role != "participant":
            return
        with self._job_lock:
            if self._job is not None:
                log.info("%s: busy, not acknowledging round %d",
                         self.config.client_id, env.round)
                return
            job = _Job(experiment_id=env.experiment_id, round=env.round)
            self._job = job
        self._worker = threading.Thread(
            target=self._run_job, args=(job, env.payload), daemon=True
        )
        self._worker.start()

    def _on_job_abort(self, env: Envelope) -> None:
        with self._job_lock:
            job = self._job
            if (
                job is not None
                and job.experiment_id == env.experiment_id
                and job.round == env.round
            ):
                job.cancel.set()
            else:
                log.info("%s: ignoring abort for %s round %d",
                         self.config.client_id, env.experiment_id, env.round)

    def _cancel_active(self) -> None:
        with self._job_lock:
            if self._job is not None:
                self._job.cancel.set()

    # ------------------------------------------------------------ the job

    def _run_job(self, job: _Job, payload: dict) -> None:
        eid, round_no = job.experiment_id, job.round
        own = self.config.client_id
        try:
            self._publish_job_msg(MSG_JOB_ACKNOWLEDGE, eid, round_no, {})
            self.runtime.set_status(STATE_TRAINING, eid, round_no)

            model_config = ModelConfig.from_doc(payload["model_config"])
            training = TrainingSettings.from_doc(payload.get("training", {}))
            params = AlgorithmParams.from_doc(payload["algorithm"])
            global_w = weights_from_doc(payload["weights"]).astype("f64")
            server_control = (
                weights_from_doc(payload["server_control"]).astype("f64")
                if "server_control" in payload
                else None
            )
            consent = self.config.allow_metrics_upload
            if consent is None:
                consent = bool(payload.get("allow_metrics_upload_default", True))

            if self._alg_experiment != eid:
                self._alg_state = ClientAlgState.init(global_w)
                self._alg_experiment = eid

            pre_metrics = None
            if payload.get("pre_eval"):
                self.runtime.set_status(STATE_EVALUATING, eid, round_no)
                pre_metrics = self._try_eval(model_config, global_w, training)
                self.runtime.set_status(STATE_TRAINING, eid, round_no)

            modifier = make_modifier(params, global_w, self._alg_state, server_control)
            round_seed = derive_seed(training.rng_seed, round_no, own)
            settings = TrainingSettings.from_doc(
                {**training.to_doc(), "rng_seed": round_seed}
            )
            deadline = time.monotonic() + float(payload.get("train_timeout", 600.0))
            result = train_local(
                model_config,
                global_w,
                self.data.train,
                settings,
                modifier=modifier,
                deadline=deadline,
                should_cancel=job.cancel.is_set,
            )
            if result.cancelled:
                log.info("%s: round %d aborted, discarding partial result", own, round_no)
                return

            delta_c, self._alg_state = finalize_client_update(
                params, global_w, result.weights, self._alg_state,
                result.steps, server_control,
            )

            post_metrics = None
            if payload.get("post_eval"):
                self.runtime.set_status(STATE_EVALUATING, eid, round_no)
                post_metrics = self._try_eval(model_config, result.weights, training)

            reply = {
                "weights": weights_to_doc(result.weights),
                "n_train_samples": len(self.data.train),
                "completed_epochs": result.completed_epochs,
                "steps": result.steps,
                "truncated": result.completed_epochs < settings.epochs,
            }
            if delta_c is not None:
                reply["delta_c"] = weights_to_doc(delta_c)
            if consent:
                if pre_metrics is not None:
                    reply["pre_eval"] = pre_metrics.to_doc()
                if post_metrics is not None:
                    reply["post_eval"] = post_metrics.to_doc()
            if job.cancel.is_set():
                log.info("%s: round %d aborted before reply, discarding", own, round_no)
                return
            self._publish_job_msg(MSG_JOB_REPLY, eid, round_no, reply)
        except (TrainingFailure, AlgorithmError, StructureMismatch, CodecError,
                LoaderError, KeyError, ValueError) as exc:
            log.warning("%s: round %d failed: %s", own, round_no, exc)
            if not job.cancel.is_set():
                try:
                    self._publish_job_msg(
                        MSG_JOB_FAILED, eid, round_no, {"reason": str(exc)}
                    )
                except Exception:
                    log.exception("%s: could not publish JobFailed", own)
        except Exception as exc:
            log.exception("%s: unexpected crash in round %d", own, round_no)
            if not job.cancel.is_set():
                try:
                    self._publish_job_msg(
                        MSG_JOB_FAILED, eid, round_no, {"reason": f"crash: {exc}"}
                    )
                except Exception:
                    log.exception("%s: could not publish JobFailed", own)
        finally:
            with self._job_lock:
                self._job = None
            self.runtime.set_status(STATE_IDLE, eid, round_no)

    def _try_eval(self, model_config, weights, training):
        """Evaluation failures are tolerated: log and return nothing."""
        try:
            return evaluate(
                model_config, weights, self.data.eval,
                threshold=training.class_threshold,
            )
        except Exception as exc:
            log.warning("%s: evaluation failed: %s", self.config.client_id, exc)
            return None

    def _publish_job_msg(self, msg_type: str, eid: str, round_no: int, payload: dict) -> None:
        self.runtime.publish(
            Envelope(
                msg_type=msg_type,
                sender_id=self.config.client_id,
                experiment_id=eid,
                round=round_no,
                payload=payload,
            ),
            suffix_client=self.config.client_id,
        )

    # ----------------------------------------------------- model retrieval

    def request_model(self, experiment_id: str) -> None:
        self.runtime.publish(
            Envelope(
                msg_type=MSG_MODEL_REQUEST,
                sender_id=self.config.client_id,
                experiment_id=experiment_id,
                payload={},
            ),
            suffix_client=self.config.client_id,
        )

    def _on_model_reply(self, env: Envelope) -> None:
        if "error" in env.payload:
            log.warning("%s: model request failed: %s",
                        self.config.client_id, env.payload["error"])
            return
        try:
            weights = weights_from_doc(env.payload["weights"])
        except (CodecError, KeyError) as exc:
            log.error("%s: undecodable final model: %s", self.config.client_id, exc)
            return
        exp_dir = self.artifact_root / "experiments" / env.experiment_id
        exp_dir.mkdir(parents=True, exist_ok=True)
        write_weights_file(exp_dir / "final.weights", weights)
        log.info("%s: stored final model for %s", self.config.client_id, env.experiment_id)
        if self.config.role == "observer":
            metrics = self._try_eval_final(env, weights)
            if metrics is not None:
                with open(exp_dir / "metrics.jsonl", "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(
                        {"experiment_id": env.experiment_id, "final_eval": metrics.to_doc()},
                        sort_keys=True,
                    ) + "\n")

    def _try_eval_final(self, env: Envelope, weights):
        try:
            config_doc = env.payload.get("model_config")
            if config_doc is not None:
                model_config = ModelConfig.from_doc(config_doc)
            else:
                model_config = self._infer_config(weights)
            return evaluate(model_config, weights, self.data.eval)
        except Exception as exc:
            log.warning("%s: final-model evaluation failed: %s",
                        self.config.client_id, exc)
            return None

    @staticmethod
    def _infer_config(weights) -> ModelConfig:
        """Reconstruct layer sizes from weight shapes; activations default to
        the platform standard (tanh hidden, sigmoid output)."""
        from ..model.config import LayerConfig

        hidden = []
        input_dim = None
        for block in weights:
            if block.name.endswith("/W") and block.name.startswith("layer"):
                if input_dim is None:
                    input_dim = block.shape[0]
                hidden.append(LayerConfig(units=block.shape[1]))
        if input_dim is None:
            raise ValueError("weight bundle has no hidden layers")
        return ModelConfig(input_dim=input_dim, layers=tuple(hidden))
