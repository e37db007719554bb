"""Round orchestration per the federation protocol.

One experiment runs at a time. Broker deliveries are routed onto the active
experiment's intake queue and consumed by a single orchestration thread, so
every state transition is sequential. Timeouts are plain queue-read deadlines
on that thread.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field

from ..algorithms import (
    AlgorithmError,
    ClientUpdate,
    ServerAggState,
    aggregate,
    weighted_metric_mean,
)
from ..experiment import ExperimentSpec, validate_experiment
from ..model.metrics import EvalMetrics
from ..model.network import build_model
from ..model.tensors import ModelWeights, StructureMismatch
from ..model.training import derive_seed
from ..protocol.codec import CodecError, weights_from_doc, weights_to_doc
from ..protocol.envelope import Envelope
from ..protocol.topics import (
    MSG_EXPERIMENT_ACCEPTED,
    MSG_EXPERIMENT_REJECTED,
    MSG_EXPERIMENT_REQUEST,
    MSG_JOB_ABORT,
    MSG_JOB_ACKNOWLEDGE,
    MSG_JOB_FAILED,
    MSG_JOB_REPLY,
    MSG_JOB_REQUEST,
    MSG_MODEL_REPLY,
    MSG_MODEL_REQUEST,
    T_CONTROL_CENTER,
    T_JOB_REPLIES,
    T_MODEL_REQUESTS,
)
from ..runtime import NodeRuntime
from ..schedulers import initial_scheduler, scheduler_round
from .artifacts import ArtifactStore

log = logging.getLogger(__name__)

STATUS_IDLE = "IDLE"
STATUS_WAITING = "WAITING"
STATUS_AGGREGATING = "AGGREGATING"


@dataclass
class ExperimentRecord:
    spec: ExperimentSpec
    status: str = "running"
    rounds: list = field(default_factory=list)
    final_weights: ModelWeights | None = None
    last_round: int = 0
    diagnostic: str = ""


@dataclass
class _ActiveRun:
    spec: ExperimentSpec
    inbox: queue.Queue = field(default_factory=queue.Queue)
    thread: threading.Thread | None = None


class ParameterServer:
    def __init__(self, runtime: NodeRuntime, participants: list[str], artifact_root):
        self.runtime = runtime
        self.participants = list(participants)
        self.store = ArtifactStore(artifact_root)
        self.records: dict[str, ExperimentRecord] = {}
        self._lock = threading.RLock()
        self._run: _ActiveRun | None = None
        runtime.handler = self._handle

    def start(self) -> None:
        self.runtime.subscribe(T_CONTROL_CENTER)
        self.runtime.subscribe(f"{T_JOB_REPLIES}/+")
        self.runtime.subscribe(f"{T_MODEL_REQUESTS}/+")
        self.runtime.start()
        self.runtime.set_status(STATUS_IDLE)

    def stop(self) -> None:
        self.runtime.stop()

    def wait_idle(self, timeout: float = 60.0) -> bool:
        """Block until no experiment is running (test/benchmark helper)."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                run = self._run
            if run is None:
                return True
            if run.thread is not None:
                run.thread.join(timeout=0.1)
            else:
                time.sleep(0.05)
        return False

    # ------------------------------------------------------------- intake

    def _handle(self, topic: str, env: Envelope) -> None:
        if env.msg_type == MSG_EXPERIMENT_REQUEST:
            self._on_experiment_request(env)
        elif env.msg_type in (MSG_JOB_ACKNOWLEDGE, MSG_JOB_REPLY, MSG_JOB_FAILED):
            self._route_job_message(env)
        elif env.msg_type == MSG_MODEL_REQUEST:
            self._on_model_request(env)

    def _route_job_message(self, env: Envelope) -> None:
        with self._lock:
            run = self._run
        if run is None or env.experiment_id != run.spec.experiment_id:
            log.info("stale %s from %s for experiment %s round %d",
                     env.msg_type, env.sender_id, env.experiment_id, env.round)
            if env.experiment_id in self.records:
                self.store.append_event(
                    env.experiment_id,
                    f"stale {env.msg_type} from {env.sender_id} (round {env.round})",
                )
            return
        run.inbox.put(env)

    def _on_experiment_request(self, env: Envelope) -> None:
        experiment_id = env.experiment_id
        with self._lock:
            busy = self._run is not None
        if busy:
            self._reply_experiment(env, MSG_EXPERIMENT_REJECTED, {"reason": "busy"})
            return
        report = validate_experiment(env.payload, n_participants=len(self.participants))
        if not report.valid:
            self._reply_experiment(
                env,
                MSG_EXPERIMENT_REJECTED,
                {"reason": "invalid", "validation": report.to_doc()},
            )
            return
        spec = ExperimentSpec.from_request(experiment_id, env.payload)
        record = ExperimentRecord(spec=spec)
        run = _ActiveRun(spec=spec)
        with self._lock:
            if self._run is not None:
                self._reply_experiment(env, MSG_EXPERIMENT_REJECTED, {"reason": "busy"})
                return
            self._run = run
            self.records[experiment_id] = record
        self._reply_experiment(
            env, MSG_EXPERIMENT_ACCEPTED, {"experiment_id": experiment_id}
        )
        run.thread = threading.Thread(
            target=self._run_experiment, args=(run, record), daemon=True
        )
        run.thread.start()

    def _reply_experiment(self, request: Envelope, msg_type: str, payload: dict) -> None:
        self.runtime.publish(
            Envelope(
                msg_type=msg_type,
                sender_id=self.runtime.identity.client_id,
                experiment_id=request.experiment_id,
                payload=payload,
            )
        )

    # ------------------------------------------------------- orchestration

    def _run_experiment(self, run: _ActiveRun, record: ExperimentRecord) -> None:
        spec = run.spec
        eid = spec.experiment_id
        try:
            self.store.prepare(eid, spec.to_doc())
            if spec.model_config.seed_policy == "explicit":
                seed = spec.model_config.init_seed
            else:
                seed = derive_seed("model-init", eid)
            global_w = build_model(spec.model_config, seed)
            agg_state = ServerAggState.init(global_w, len(self.participants))
            controllers = spec.controllers
            sched = initial_scheduler(
                spec.training.learning_rate,
                controllers.plateau_patience or 0,
                controllers.stop_patience or 0,
                reduce_factor=controllers.plateau_factor,
                min_delta=controllers.plateau_min_delta,
            )
            best_weights: ModelWeights | None = None
            aggregated_rounds = 0
            stop_reason = "rounds_exhausted"
            self.store.append_event(eid, f"experiment started, {spec.rounds} rounds")

            for round_no in range(1, spec.rounds + 1):
                record.last_round = round_no
                outcome = self._run_round(run, record, round_no, global_w, agg_state, sched)
                if outcome is None:
                    return  # terminal failure already recorded
                global_w, agg_state, sched, aggregated, stop = outcome
                if aggregated:
                    aggregated_rounds += 1
                    if controllers.enabled and sched.best_round == round_no:
                        best_weights = global_w.copy()
                if stop:
                    stop_reason = "early_stop"
                    self.store.append_event(eid, f"early stop after round {round_no}")
                    break

            self._finish(record, global_w, best_weights, aggregated_rounds, stop_reason)
        except OSError as exc:
            self._fail(record, f"artifact storage failure: {exc}")
        except Exception as exc:  # orchestration must never die silently
            log.exception("experiment %s crashed", eid)
            self._fail(record, f"internal error: {exc}")
        finally:
            with self._lock:
                self._run = None
            self.runtime.set_status(
                STATUS_IDLE,
                eid,
                record.last_round,
                diagnostic=record.diagnostic,
                extra={"experiment_status": record.status},
            )

    def _run_round(self, run, record, round_no, global_w, agg_state, sched):
        """One full round; returns (global, agg_state, sched, aggregated, stop)
        or None when the experiment just failed terminally."""
        spec = run.spec
        eid = spec.experiment_id
        training = spec.training
        if spec.controllers.plateau_patience:
            training = training.with_learning_rate(sched.current_lr)

        payload = {
            "model_config": spec.model_config.to_doc(),
            "training": training.to_doc(),
            "algorithm": spec.algorithm.to_doc(),
            "pre_eval": spec.pre_eval,
            "post_eval": spec.post_eval,
            "train_timeout": spec.train_timeout,
            "eval_timeout": spec.eval_timeout,
            "allow_metrics_upload_default": spec.allow_metrics_upload_default,
            "rounds_total": spec.rounds,
            "weights": weights_to_doc(global_w),
        }
        if spec.algorithm.kind == "scaffold":
            payload["server_control"] = weights_to_doc(agg_state.scaffold_c)

        self.runtime.set_status(STATUS_WAITING, eid, round_no)
        broadcast_at = time.monotonic()
        self.runtime.publish(
            Envelope(
                msg_type=MSG_JOB_REQUEST,
                sender_id=self.runtime.identity.client_id,
                experiment_id=eid,
                round=round_no,
                payload=payload,
            )
        )

        acks: set[str] = set()
        failures: set[str] = set()
        replies: dict[str, ClientUpdate] = {}
        reply_meta: dict[str, dict] = {}

        def consume(env: Envelope) -> None:
            if env.round != round_no or env.experiment_id != eid:
                self.store.append_event(
                    eid, f"stale {env.msg_type} from {env.sender_id} (round {env.round})"
                )
                return
            sender = env.sender_id
            if sender not in self.participants:
                self.store.append_event(eid, f"ignoring {env.msg_type} from unknown {sender}")
                return
            if env.msg_type == MSG_JOB_ACKNOWLEDGE:
                acks.add(sender)
            elif env.msg_type == MSG_JOB_FAILED:
                acks.add(sender)
                failures.add(sender)
                self.store.append_event(
                    eid, f"round {round_no}: {sender} failed: {env.payload.get('reason', '')}"
                )
            elif env.msg_type == MSG_JOB_REPLY:
                acks.add(sender)
                try:
                    update, meta = self._parse_reply(spec, sender, env.payload)
                except (CodecError, AlgorithmError, KeyError, TypeError, ValueError) as exc:
                    failures.add(sender)
                    self.store.append_event(
                        eid, f"round {round_no}: unusable reply from {sender}: {exc}"
                    )
                    return
                replies[sender] = update
                reply_meta[sender] = meta

        # Acknowledgement window.
        ack_deadline = broadcast_at + spec.ack_timeout
        while time.monotonic() < ack_deadline and len(acks) < len(self.participants):
            env = self._next(run, ack_deadline)
            if env is not None:
                consume(env)

        if len(acks) < spec.min_replies:
            self.runtime.publish(
                Envelope(
                    msg_type=MSG_JOB_ABORT,
                    sender_id=self.runtime.identity.client_id,
                    experiment_id=eid,
                    round=round_no,
                    payload={"reason": "insufficient acknowledgements"},
                )
            )
            self._record_skip(record, round_no,
                             f"insufficient acks ({len(acks)} of {spec.min_replies})",
                             aborted=True)
            return global_w, agg_state, sched, False, False

        # Reply window; early exit when everyone answered or quorum is
        # already impossible.
        reply_deadline = broadcast_at + spec.round_deadline_seconds()
        while time.monotonic() < reply_deadline:
            answered = len(replies) + len(failures)
            if answered >= len(acks):
                break
            if len(acks) - len(failures) < spec.min_replies:
                break
            env = self._next(run, reply_deadline)
            if env is not None:
                consume(env)

        if len(replies) < spec.min_replies:
            self._record_skip(record, round_no,
                             f"insufficient replies ({len(replies)} of {spec.min_replies})",
                             aborted=False)
            return global_w, agg_state, sched, False, False

        self.runtime.set_status(STATUS_AGGREGATING, eid, round_no)
        updates = list(replies.values())
        try:
            new_global, agg_state = aggregate(spec.algorithm, global_w, updates, agg_state)
        except (StructureMismatch, AlgorithmError) as exc:
            self._fail(record, f"aggregation failed in round {round_no}: {exc}")
            return None

        stop = False
        monitored = None
        weighted = self._weighted_metrics(updates, "post_eval")
        pre_weighted = self._weighted_metrics(updates, "pre_eval")
        if spec.controllers.enabled and weighted is not None:
            monitored = weighted["loss"]
            _, stop, sched = scheduler_round(
                sched, monitored, "minimize",
                round_index=round_no, weights_ref=f"round_{round_no}",
            )

        best_round = sched.best_round if spec.controllers.enabled else None
        key = self.store.write_global(eid, round_no, new_global, best_round=best_round)
        for cid, update in replies.items():
            self.store.write_client_latest(eid, cid, update.new_weights)
        row = {
            "round": round_no,
            "aggregated": True,
            "participants": sorted(replies),
            "failures": sorted(failures),
            "lr": training.learning_rate,
            "weighted_post_eval": weighted,
            "weighted_pre_eval": pre_weighted,
            "per_client": {
                cid: {
                    "n_train_samples": replies[cid].n_train_samples,
                    **reply_meta[cid],
                    **(
                        {"post_eval": replies[cid].post_eval.to_doc()}
                        if replies[cid].post_eval is not None
                        else {}
                    ),
                    **(
                        {"pre_eval": replies[cid].pre_eval.to_doc()}
                        if replies[cid].pre_eval is not None
                        else {}
                    ),
                }
                for cid in sorted(replies)
            },
        }
        self.store.append_metrics(eid, row)
        self.store.append_event(
            eid,
            f"round {round_no} aggregated from {len(replies)} replies (stored {key})",
        )
        record.rounds.append(row)
        # Compact round outcome for status-report observers; the full row
        # (per-client detail) stays in the artifact store.
        result = {"round": round_no, "aggregated": True,
                  "n_participants": len(replies)}
        if weighted is not None:
            result["weighted_post_eval"] = weighted
        self.runtime.set_status(STATUS_AGGREGATING, eid, round_no,
                                extra={"round_result": result})
        return new_global, agg_state, sched, True, stop

    def _next(self, run: _ActiveRun, deadline: float) -> Envelope | None:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            return None
        try:
            return run.inbox.get(timeout=min(remaining, 0.5))
        except queue.Empty:
            return None

    def _parse_reply(self, spec: ExperimentSpec, sender: str, payload: dict):
        weights = weights_from_doc(payload["weights"])
        delta_c = (
            weights_from_doc(payload["delta_c"]) if "delta_c" in payload else None
        )
        post_eval = (
            EvalMetrics.from_doc(payload["post_eval"]) if "post_eval" in payload else None
        )
        pre_eval = (
            EvalMetrics.from_doc(payload["pre_eval"]) if "pre_eval" in payload else None
        )
        update = ClientUpdate(
            client_id=sender,
            new_weights=weights,
            n_train_samples=int(payload["n_train_samples"]),
            delta_c=delta_c,
            post_eval=post_eval,
            pre_eval=pre_eval,
        )
        meta = {
            "completed_epochs": int(payload.get("completed_epochs", 0)),
            "truncated": bool(payload.get("truncated", False)),
        }
        return update, meta

    def _weighted_metrics(self, updates: list[ClientUpdate], which: str) -> dict | None:
        """Sample-weighted mean over clients that reported the given block."""
        pairs = [
            (getattr(u, which), u.n_train_samples)
            for u in sorted(updates, key=lambda u: u.client_id)
            if getattr(u, which) is not None
        ]
        if not pairs:
            return None
        weights = [n for _, n in pairs]
        out = {}
        for name in ("loss", "precision", "recall", "f1", "auprc"):
            out[name] = weighted_metric_mean([getattr(m, name) for m, _ in pairs], weights)
        out["n_clients"] = len(pairs)
        return out

    def _record_skip(self, record: ExperimentRecord, round_no: int, why: str,
                     aborted: bool) -> None:
        eid = record.spec.experiment_id
        self.store.append_event(eid, f"round {round_no} skipped: {why}")
        row = {"round": round_no, "aggregated": False, "reason": why, "aborted": aborted}
        self.store.append_metrics(eid, row)
        record.rounds.append(row)
        # The skip row is small enough to ride along on the status report,
        # which is how the control center learns about round outcomes.
        self.runtime.set_status(STATUS_WAITING, eid, round_no,
                                extra={"round_result": row})

    def _finish(self, record: ExperimentRecord, last_global: ModelWeights,
                best_weights: ModelWeights | None, aggregated_rounds: int,
                stop_reason: str) -> None:
        eid = record.spec.experiment_id
        if aggregated_rounds == 0:
            self._fail(record, "no round reached the reply quorum")
            return
        if stop_reason == "early_stop" and best_weights is not None:
            final = best_weights
            record.status = "stopped_early"
        else:
            final = last_global
            record.status = "completed"
        record.final_weights = final
        self.runtime.publish(
            Envelope(
                msg_type=MSG_MODEL_REPLY,
                sender_id=self.runtime.identity.client_id,
                experiment_id=eid,
                round=record.last_round,
                payload={
                    "weights": weights_to_doc(final),
                    "model_config": record.spec.model_config.to_doc(),
                    "final": True,
                    "reason": record.status,
                },
            )
        )
        self.store.append_event(
            eid, f"experiment finished: {record.status} ({aggregated_rounds} aggregated rounds)"
        )

    def _fail(self, record: ExperimentRecord, diagnostic: str) -> None:
        record.status = "failed"
        record.diagnostic = diagnostic
        log.error("experiment %s failed: %s", record.spec.experiment_id, diagnostic)
        try:
            self.store.append_event(record.spec.experiment_id, f"experiment failed: {diagnostic}")
        except OSError:
            pass

    # ---------------------------------------------------------- model serving

    def _on_model_request(self, env: Envelope) -> None:
        record = self.records.get(env.experiment_id)
        if record is None:
            payload = {"error": "unknown experiment"}
        elif record.status == "running":
            payload = {"error": "not finalized"}
        elif record.final_weights is None:
            payload = {"error": "no final model"}
        else:
            payload = {
                "weights": weights_to_doc(record.final_weights),
                "model_config": record.spec.model_config.to_doc(),
                "final": True,
                "reason": record.status,
            }
        self.runtime.publish(
            Envelope(
                msg_type=MSG_MODEL_REPLY,
                sender_id=self.runtime.identity.client_id,
                experiment_id=env.experiment_id,
                round=record.last_round if record else 0,
                payload=payload,
            ),
            suffix_client=env.sender_id,
        )
