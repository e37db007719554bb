"""Control-center core: submission, network view, experiment tracking.

The broker consumer updates an internal snapshot; HTTP handlers and the CLI
read it without touching broker state. Nothing here is fabricated: every
visible status was received as a message (retained or live).
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from ..experiment import ValidationReport, validate_experiment
from ..protocol.codec import CodecError, weights_from_doc, write_weights_file
from ..protocol.envelope import Envelope
from ..protocol.topics import (
    MSG_EXPERIMENT_ACCEPTED,
    MSG_EXPERIMENT_REJECTED,
    MSG_EXPERIMENT_REQUEST,
    MSG_MODEL_REPLY,
    MSG_MODEL_REQUEST,
    MSG_STATUS_REPORT,
    T_MODEL_REPLIES,
    T_PS_REPLIES,
    T_STATUS_REPORTS,
)
from ..runtime import FederationConfig, NodeRuntime

log = logging.getLogger(__name__)

STALE_FACTOR = 3.0


@dataclass
class SubmitOutcome:
    accepted: bool
    experiment_id: str | None = None
    reason: str | None = None       # busy | invalid | unreachable
    validation: dict | None = None  # PS-side report when reason == invalid


@dataclass
class _Waiter:
    event: threading.Event = field(default_factory=threading.Event)
    payload: dict | None = None
    msg_type: str | None = None


def _parse_ts(stamp: str) -> float | None:
    try:
        return datetime.fromisoformat(stamp).timestamp()
    except ValueError:
        return None


class ControlCenter:
    def __init__(self, runtime: NodeRuntime, federation: FederationConfig,
                 reply_timeout: float = 15.0):
        self.runtime = runtime
        self.federation = federation
        self.reply_timeout = reply_timeout
        self._lock = threading.Lock()
        self._submit_lock = threading.Lock()
        self._network: dict[str, dict] = {}
        self._experiments: dict[str, dict] = {}
        self._order: list[str] = []
        self._waiters: dict[tuple[str, str], _Waiter] = {}
        runtime.handler = self._handle

    def start(self) -> None:
        self.runtime.subscribe(T_PS_REPLIES)
        self.runtime.subscribe(f"{T_STATUS_REPORTS}/+")
        self.runtime.subscribe(T_MODEL_REPLIES)
        self.runtime.subscribe(f"{T_MODEL_REPLIES}/{self.runtime.identity.client_id}")
        self.runtime.start()

    def stop(self) -> None:
        self.runtime.stop()

    # ------------------------------------------------------------- intake

    def _handle(self, topic: str, env: Envelope) -> None:
        if env.msg_type == MSG_STATUS_REPORT:
            self._on_status(env)
        elif env.msg_type in (MSG_EXPERIMENT_ACCEPTED, MSG_EXPERIMENT_REJECTED):
            self._on_ps_reply(env)
        elif env.msg_type == MSG_MODEL_REPLY:
            self._on_model_reply(env, topic)

    def _on_status(self, env: Envelope) -> None:
        payload = env.payload
        with self._lock:
            known_role = next(
                (n.role for n in self.federation.nodes if n.client_id == env.sender_id),
                None,
            )
            self._network[env.sender_id] = {
                "client_id": env.sender_id,
                "role": payload.get("role", known_role or "unknown"),
                "known": known_role is not None,
                "state": payload.get("state", "unknown"),
                "experiment_id": env.experiment_id,
                "round": env.round,
                "diagnostic": payload.get("diagnostic", ""),
                "heartbeat_interval": float(
                    payload.get("heartbeat_interval", self.federation.heartbeat_interval)
                ),
                "last_seen": env.sent_at,
            }
            if payload.get("role") == "parameter_server" and env.experiment_id:
                exp = self._experiments.get(env.experiment_id)
                if exp is not None:
                    exp["last_round"] = max(exp.get("last_round", 0), env.round)
                    result = payload.get("round_result")
                    if result is not None:
                        rounds = exp.setdefault("rounds", [])
                        if all(r.get("round") != result.get("round") for r in rounds):
                            rounds.append(result)
                        weighted = result.get("weighted_post_eval")
                        if weighted is not None:
                            exp["last_weighted_eval"] = weighted
                    final_status = payload.get("experiment_status")
                    if final_status and final_status != "running":
                        exp["status"] = final_status
                        if payload.get("diagnostic"):
                            exp["diagnostic"] = payload["diagnostic"]

    def _on_ps_reply(self, env: Envelope) -> None:
        key = ("experiment", env.experiment_id)
        with self._lock:
            exp = self._experiments.get(env.experiment_id)
            if exp is not None:
                if env.msg_type == MSG_EXPERIMENT_ACCEPTED:
                    exp["status"] = "running"
                else:
                    exp["status"] = "rejected"
                    exp["rejection"] = env.payload
            waiter = self._waiters.get(key)
            if waiter is not None:
                waiter.payload = env.payload
                waiter.msg_type = env.msg_type
                waiter.event.set()

    def _on_model_reply(self, env: Envelope, topic: str) -> None:
        with self._lock:
            exp = self._experiments.get(env.experiment_id)
            if exp is not None and env.payload.get("final") and "weights" in env.payload:
                exp["final_model_seen"] = True
                reason = env.payload.get("reason")
                if reason in ("completed", "stopped_early"):
                    exp["status"] = reason
            waiter = self._waiters.get(("model", env.experiment_id))
            if waiter is not None and topic.endswith(f"/{self.runtime.identity.client_id}"):
                waiter.payload = env.payload
                waiter.msg_type = env.msg_type
                waiter.event.set()

    # ------------------------------------------------------------- actions

    def validate(self, request_doc: dict) -> ValidationReport:
        return validate_experiment(request_doc)

    def submit_experiment(self, request_doc: dict,
                          timeout: float | None = None) -> SubmitOutcome:
        """Validate locally, publish, wait for the server's verdict."""
        report = self.validate(request_doc)
        if not report.valid:
            return SubmitOutcome(accepted=False, reason="invalid",
                                 validation=report.to_doc())
        timeout = timeout if timeout is not None else self.reply_timeout
        experiment_id = str(uuid.uuid4())
        with self._submit_lock:
            waiter = _Waiter()
            settings = request_doc.get("settings", {})
            with self._lock:
                self._waiters[("experiment", experiment_id)] = waiter
                self._experiments[experiment_id] = {
                    "experiment_id": experiment_id,
                    "status": "submitted",
                    "rounds_total": settings.get("rounds"),
                    "algorithm": settings.get("algorithm", {}).get("kind"),
                    "last_round": 0,
                    "submitted_at": time.time(),
                }
                self._order.append(experiment_id)
            try:
                self.runtime.publish(
                    Envelope(
                        msg_type=MSG_EXPERIMENT_REQUEST,
                        sender_id=self.runtime.identity.client_id,
                        experiment_id=experiment_id,
                        payload=request_doc,
                    )
                )
                if not waiter.event.wait(timeout):
                    with self._lock:
                        self._experiments[experiment_id]["status"] = "unreachable"
                    return SubmitOutcome(accepted=False, reason="unreachable",
                                         experiment_id=experiment_id)
            finally:
                with self._lock:
                    self._waiters.pop(("experiment", experiment_id), None)
        if waiter.msg_type == MSG_EXPERIMENT_ACCEPTED:
            return SubmitOutcome(accepted=True, experiment_id=experiment_id)
        reason = waiter.payload.get("reason", "rejected")
        return SubmitOutcome(
            accepted=False,
            experiment_id=experiment_id,
            reason=reason,
            validation=waiter.payload.get("validation"),
        )

    def get_network_status(self) -> list[dict]:
        """One entry per configured or observed node, stale-flagged."""
        now = time.time()
        with self._lock:
            entries = {cid: dict(e) for cid, e in self._network.items()}
        for node in self.federation.nodes:
            if node.client_id == self.runtime.identity.client_id:
                continue
            entries.setdefault(
                node.client_id,
                {
                    "client_id": node.client_id,
                    "role": node.role,
                    "known": True,
                    "state": "never_seen",
                    "experiment_id": "",
                    "round": 0,
                    "diagnostic": "",
                    "heartbeat_interval": self.federation.heartbeat_interval,
                    "last_seen": None,
                },
            )
        out = []
        for cid in sorted(entries):
            entry = entries[cid]
            seen = _parse_ts(entry["last_seen"]) if entry["last_seen"] else None
            window = STALE_FACTOR * entry["heartbeat_interval"]
            entry["stale"] = seen is None or (now - seen) > window
            out.append(entry)
        return out

    def list_experiments(self) -> list[dict]:
        with self._lock:
            return [self._snapshot(self._experiments[eid]) for eid in self._order]

    def get_experiment(self, experiment_id: str) -> dict | None:
        with self._lock:
            exp = self._experiments.get(experiment_id)
            return self._snapshot(exp) if exp is not None else None

    @staticmethod
    def _snapshot(exp: dict) -> dict:
        out = dict(exp)
        if "rounds" in out:
            out["rounds"] = list(out["rounds"])
        return out

    def request_final_model(self, experiment_id: str, destination,
                            timeout: float | None = None) -> Path:
        """Fetch the finished global model over the model-request flow and
        write it as a weight file; raises on any failure, never leaving a
        partial file behind."""
        exp = self.get_experiment(experiment_id)
        if exp is None:
            raise LookupError(f"unknown experiment {experiment_id}")
        if exp["status"] not in ("completed", "stopped_early"):
            raise RuntimeError(f"experiment is {exp['status']}, not finalized")
        timeout = timeout if timeout is not None else self.reply_timeout
        waiter = _Waiter()
        with self._lock:
            self._waiters[("model", experiment_id)] = waiter
        try:
            self.runtime.publish(
                Envelope(
                    msg_type=MSG_MODEL_REQUEST,
                    sender_id=self.runtime.identity.client_id,
                    experiment_id=experiment_id,
                    payload={},
                ),
                suffix_client=self.runtime.identity.client_id,
            )
            if not waiter.event.wait(timeout):
                raise TimeoutError("parameter server unreachable")
        finally:
            with self._lock:
                self._waiters.pop(("model", experiment_id), None)
        payload = waiter.payload or {}
        if "error" in payload:
            raise RuntimeError(payload["error"])
        try:
            weights = weights_from_doc(payload["weights"])
        except (CodecError, KeyError) as exc:
            raise RuntimeError(f"undecodable model payload: {exc}") from exc
        destination = Path(destination)
        destination.parent.mkdir(parents=True, exist_ok=True)
        tmp = destination.with_suffix(destination.suffix + ".part")
        write_weights_file(tmp, weights)
        tmp.replace(destination)
        return destination
