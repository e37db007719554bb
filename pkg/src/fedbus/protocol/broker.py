"""In-process message broker with retained messages and ACL enforcement.

Used directly by tests and the benchmark harness, and by the TCP front-end
that speaks real MQTT to out-of-process nodes. Delivery is exactly-once to
each attached subscription, in publish order (one lock serializes fan-out).
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass, field

from .acl import AclRule, NodeIdentity, acl_check
from .topics import match_topic

MAX_PAYLOAD = 64 * 1024 * 1024


class BrokerError(RuntimeError):
    pass


@dataclass
class AuditEntry:
    action: str  # publish | subscribe
    client_id: str
    topic: str
    allowed: bool
    note: str = ""


@dataclass
class Subscription:
    """One pattern's delivery stream; consume with receive()."""

    client_id: str
    pattern: str
    _queue: queue.Queue = field(default_factory=lambda: queue.Queue(maxsize=4096), repr=False)
    _closed: bool = False

    def receive(self, timeout: float | None = None):
        """Next (topic, payload) pair, or None when the timeout elapses."""
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None

    def drain(self) -> list:
        """Everything currently queued, without blocking."""
        items = []
        while True:
            try:
                items.append(self._queue.get_nowait())
            except queue.Empty:
                return items

    def close(self) -> None:
        self._closed = True


class EmbeddedBroker:
    """Deterministic broker core: allowlist authentication, default-deny
    ACLs, latest-wins retained store, per-subscription FIFO queues."""

    def __init__(
        self,
        identities: list[NodeIdentity],
        rules: list[AclRule],
        max_payload: int = MAX_PAYLOAD,
    ):
        self._identities = {i.client_id: i for i in identities}
        if len(self._identities) != len(identities):
            raise BrokerError("duplicate client_id in identity list")
        self._rules = list(rules)
        self._max_payload = max_payload
        self._lock = threading.Lock()
        self._subs: list[Subscription] = []
        self._retained: dict[str, bytes] = {}
        self.audit: list[AuditEntry] = []

    def _authenticate(self, client_id: str) -> NodeIdentity:
        ident = self._identities.get(client_id)
        if ident is None:
            raise BrokerError(f"connection refused: unknown client {client_id!r}")
        return ident

    def add_identity(self, identity: NodeIdentity, rules: list[AclRule]) -> None:
        with self._lock:
            if identity.client_id in self._identities:
                raise BrokerError(f"client {identity.client_id!r} already registered")
            self._identities[identity.client_id] = identity
            self._rules.extend(rules)

    def publish(self, client_id: str, topic: str, payload: bytes, retain: bool = False) -> bool:
        """Deliver to every matching subscription; False when ACL-denied.

        A denied publish is invisible to peers, by design; the refusal is
        recorded in the audit log only.
        """
        ident = self._authenticate(client_id)
        if "+" in topic or "#" in topic:
            raise BrokerError(f"cannot publish to a wildcard topic {topic!r}")
        if len(payload) > self._max_payload:
            raise BrokerError(
                f"payload of {len(payload)} bytes exceeds the {self._max_payload}-byte limit"
            )
        with self._lock:
            allowed = acl_check(self._rules, ident, "publish", topic)
            self.audit.append(AuditEntry("publish", client_id, topic, allowed))
            if not allowed:
                return False
            if retain:
                self._retained[topic] = payload
            dead = []
            for sub in self._subs:
                if sub._closed:
                    dead.append(sub)
                    continue
                if match_topic(sub.pattern, topic):
                    try:
                        sub._queue.put((topic, payload), timeout=5.0)
                    except queue.Full:
                        raise BrokerError(
                            f"subscriber {sub.client_id!r} queue full on {topic}"
                        )
            for sub in dead:
                self._subs.remove(sub)
        return True

    def subscribe(self, client_id: str, pattern: str) -> Subscription:
        """Attach a delivery stream; retained matches are replayed first."""
        ident = self._authenticate(client_id)
        with self._lock:
            allowed = acl_check(self._rules, ident, "subscribe", pattern)
            self.audit.append(AuditEntry("subscribe", client_id, pattern, allowed))
            if not allowed:
                raise BrokerError(f"subscription to {pattern!r} denied for {client_id!r}")
            sub = Subscription(client_id=client_id, pattern=pattern)
            for topic in sorted(self._retained):
                if match_topic(pattern, topic):
                    sub._queue.put((topic, self._retained[topic]))
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        sub.close()
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def retained_snapshot(self) -> dict[str, bytes]:
        with self._lock:
            return dict(self._retained)

    def publish_count(self, topic_substring: str = "") -> int:
        """Allowed publishes whose topic contains the substring; lets the
        benchmark prove traffic actually crossed the broker."""
        with self._lock:
            return sum(
                1
                for e in self.audit
                if e.action == "publish" and e.allowed and topic_substring in e.topic
            )
