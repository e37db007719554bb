"""Node plumbing shared by the server, clients, and control center.

A NodeRuntime owns one broker connection: deliveries from any number of
subscriptions funnel into a single intake queue consumed by one dispatcher
thread, so node logic never sees concurrent message handling. Duplicate
envelopes (at-least-once transports) are dropped on their idempotency key.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

from .protocol.acl import NodeIdentity
from .protocol.broker import EmbeddedBroker
from .protocol.envelope import Envelope, EnvelopeError, dedupe_key
from .protocol.mqtt import MqttClient
from .protocol.topics import MSG_STATUS_REPORT, TopicScheme, topic_for

log = logging.getLogger(__name__)

DEDUPE_WINDOW = 4096
HEARTBEAT_INTERVAL = 5.0


@dataclass
class FederationConfig:
    """Deployment description shared by every process in one federation."""

    prefix: str
    nodes: list[NodeIdentity]
    broker_host: str = "127.0.0.1"
    broker_port: int = 1883
    heartbeat_interval: float = HEARTBEAT_INTERVAL

    @property
    def scheme(self) -> TopicScheme:
        return TopicScheme(self.prefix)

    def participants(self) -> list[str]:
        return [n.client_id for n in self.nodes if n.role == "client_participant"]

    def to_doc(self) -> dict:
        return {
            "prefix": self.prefix,
            "broker": {"host": self.broker_host, "port": self.broker_port},
            "heartbeat_interval": self.heartbeat_interval,
            "nodes": [{"client_id": n.client_id, "role": n.role} for n in self.nodes],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "FederationConfig":
        broker = doc.get("broker", {})
        return cls(
            prefix=doc["prefix"],
            nodes=[NodeIdentity(n["client_id"], n["role"]) for n in doc["nodes"]],
            broker_host=broker.get("host", "127.0.0.1"),
            broker_port=int(broker.get("port", 1883)),
            heartbeat_interval=float(doc.get("heartbeat_interval", HEARTBEAT_INTERVAL)),
        )

    @classmethod
    def load(cls, path) -> "FederationConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_doc(json.load(fh))


class LocalTransport:
    """Direct attachment to an in-process broker."""

    def __init__(self, broker: EmbeddedBroker, client_id: str):
        self.broker = broker
        self.client_id = client_id
        self._callback = None
        self._stop = threading.Event()
        self._pumps: list[threading.Thread] = []

    def set_callback(self, callback) -> None:
        self._callback = callback

    def publish(self, topic: str, payload: bytes, retain: bool = False) -> bool:
        return self.broker.publish(self.client_id, topic, payload, retain=retain)

    def subscribe(self, pattern: str) -> None:
        sub = self.broker.subscribe(self.client_id, pattern)

        def pump():
            while not self._stop.is_set():
                item = sub.receive(timeout=0.1)
                if item is not None and self._callback is not None:
                    self._callback(*item)

        thread = threading.Thread(target=pump, daemon=True)
        thread.start()
        self._pumps.append(thread)

    def close(self) -> None:
        self._stop.set()
        for t in self._pumps:
            t.join(timeout=1.0)


class MqttTransport:
    """Attachment over a real socket to the broker front-end."""

    def __init__(self, host: str, port: int, client_id: str,
                 username: str | None = None, password: str | None = None,
                 use_tls: bool = False):
        self._callback = None
        self.client = MqttClient(
            host, port, client_id,
            username=username, password=password, use_tls=use_tls,
            on_message=self._on_message,
        )
        self.client.connect()

    def _on_message(self, topic: str, payload: bytes) -> None:
        if self._callback is not None:
            self._callback(topic, payload)

    def set_callback(self, callback) -> None:
        self._callback = callback

    def publish(self, topic: str, payload: bytes, retain: bool = False) -> bool:
        self.client.publish(topic, payload, qos=1, retain=retain)
        return True

    def subscribe(self, pattern: str) -> None:
        self.client.subscribe(pattern, qos=0)

    def close(self) -> None:
        self.client.close()


def runtime_for(federation: FederationConfig, client_id: str,
                transport=None) -> "NodeRuntime":
    """Build a NodeRuntime for one configured node; defaults to MQTT."""
    identity = next((n for n in federation.nodes if n.client_id == client_id), None)
    if identity is None:
        raise ValueError(f"client id {client_id!r} is not in the federation config")
    if transport is None:
        transport = MqttTransport(
            federation.broker_host, federation.broker_port, client_id,
        )
    return NodeRuntime(identity, federation.scheme, transport,
                       federation.heartbeat_interval)


@dataclass
class StatusSnapshot:
    state: str = "IDLE"
    experiment_id: str = ""
    round: int = 0
    diagnostic: str = ""
    extra: dict = field(default_factory=dict)


class NodeRuntime:
    """One connection, one serialized intake loop, retained status heartbeat."""

    def __init__(
        self,
        identity: NodeIdentity,
        scheme: TopicScheme,
        transport,
        heartbeat_interval: float = HEARTBEAT_INTERVAL,
    ):
        self.identity = identity
        self.scheme = scheme
        self.transport = transport
        self.heartbeat_interval = heartbeat_interval
        self.handler = None  # callable(topic, Envelope)
        self._inbox: queue.Queue = queue.Queue()
        self._seen: OrderedDict = OrderedDict()
        self._stop = threading.Event()
        self._dispatcher: threading.Thread | None = None
        self._heartbeat: threading.Thread | None = None
        self._status_lock = threading.Lock()
        self._status = StatusSnapshot()
        self._status_declared = False  # roles without a status grant never publish
        transport.set_callback(lambda topic, payload: self._inbox.put((topic, payload)))

    def subscribe(self, relative_pattern: str) -> None:
        self.transport.subscribe(self.scheme.absolute(relative_pattern))

    def start(self) -> None:
        self._stop.clear()
        self._dispatcher = threading.Thread(target=self._dispatch_loop, daemon=True)
        self._dispatcher.start()
        if self.heartbeat_interval > 0:
            self._heartbeat = threading.Thread(target=self._heartbeat_loop, daemon=True)
            self._heartbeat.start()

    def _dispatch_loop(self) -> None:
        while not self._stop.is_set():
            try:
                topic, payload = self._inbox.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                env = Envelope.from_bytes(payload)
            except EnvelopeError as exc:
                log.warning("%s: dropping undecodable message on %s: %s",
                            self.identity.client_id, topic, exc)
                continue
            key = dedupe_key(env)
            if key is not None:
                if key in self._seen:
                    log.debug("%s: duplicate %s", self.identity.client_id, key)
                    continue
                self._seen[key] = True
                while len(self._seen) > DEDUPE_WINDOW:
                    self._seen.popitem(last=False)
            if self.handler is not None:
                try:
                    self.handler(topic, env)
                except Exception:
                    log.exception("%s: handler failed for %s on %s",
                                  self.identity.client_id, env.msg_type, topic)

    def publish(self, env: Envelope, suffix_client: str | None = None,
                retain: bool = False) -> bool:
        topic = topic_for(self.scheme, env.msg_type, suffix_client)
        return self.transport.publish(topic, env.to_bytes(), retain=retain)

    def set_status(self, state: str, experiment_id: str = "", round: int = 0,
                   diagnostic: str = "", extra: dict | None = None) -> None:
        """Record the node state and immediately publish it retained."""
        with self._status_lock:
            self._status = StatusSnapshot(
                state=state, experiment_id=experiment_id, round=round,
                diagnostic=diagnostic, extra=extra or {},
            )
            self._status_declared = True
        self._publish_status()

    def _publish_status(self) -> None:
        with self._status_lock:
            if not self._status_declared:
                return
            snap = self._status
        payload = {
            "role": self.identity.role,
            "state": snap.state,
            "diagnostic": snap.diagnostic,
            "heartbeat_interval": self.heartbeat_interval,
            **snap.extra,
        }
        env = Envelope(
            msg_type=MSG_STATUS_REPORT,
            sender_id=self.identity.client_id,
            experiment_id=snap.experiment_id,
            round=snap.round,
            payload=payload,
        )
        try:
            self.publish(env, suffix_client=self.identity.client_id, retain=True)
        except Exception:
            log.exception("%s: status publish failed", self.identity.client_id)

    def _heartbeat_loop(self) -> None:
        while not self._stop.wait(self.heartbeat_interval):
            self._publish_status()

    def stop(self) -> None:
        self._stop.set()
        if self._dispatcher is not None:
            self._dispatcher.join(timeout=2.0)
        if self._heartbeat is not None:
            self._heartbeat.join(timeout=2.0)
        self.transport.close()
