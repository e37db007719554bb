"""Message envelope: the one JSON document shape every topic carries."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .topics import MSG_MODEL_REPLY, MSG_STATUS_REPORT, MSG_TYPES

PROTOCOL_VERSION = 1

_FIELDS = {"version", "msg_type", "experiment_id", "round", "sender_id", "sent_at", "payload"}


class EnvelopeError(ValueError):
    pass


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass(frozen=True)
class Envelope:
    msg_type: str
    sender_id: str
    experiment_id: str = ""
    round: int = 0
    payload: dict = field(default_factory=dict)
    version: int = PROTOCOL_VERSION
    sent_at: str = field(default_factory=utc_now)

    def __post_init__(self):
        if self.msg_type not in MSG_TYPES:
            raise EnvelopeError(f"unknown msg_type {self.msg_type!r}")
        if not self.sender_id:
            raise EnvelopeError("sender_id must be non-empty")
        if self.round < 0:
            raise EnvelopeError("round must be >= 0")
        if not self.experiment_id and self.msg_type != MSG_STATUS_REPORT:
            raise EnvelopeError(f"{self.msg_type} requires an experiment_id")
        if not isinstance(self.payload, dict):
            raise EnvelopeError("payload must be a JSON object")

    def to_doc(self) -> dict:
        return {
            "version": self.version,
            "msg_type": self.msg_type,
            "experiment_id": self.experiment_id,
            "round": self.round,
            "sender_id": self.sender_id,
            "sent_at": self.sent_at,
            "payload": self.payload,
        }

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_doc(), separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_doc(cls, doc: dict) -> "Envelope":
        if not isinstance(doc, dict):
            raise EnvelopeError("envelope must be a JSON object")
        missing = _FIELDS - set(doc)
        if missing:
            raise EnvelopeError(f"envelope missing fields {sorted(missing)}")
        unknown = set(doc) - _FIELDS
        if unknown:
            raise EnvelopeError(f"envelope has unknown fields {sorted(unknown)}")
        if not isinstance(doc["version"], int):
            raise EnvelopeError("version must be an integer")
        if not isinstance(doc["round"], int):
            raise EnvelopeError("round must be an integer")
        return cls(
            msg_type=doc["msg_type"],
            sender_id=doc["sender_id"],
            experiment_id=doc["experiment_id"],
            round=doc["round"],
            payload=doc["payload"],
            version=doc["version"],
            sent_at=doc["sent_at"],
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Envelope":
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise EnvelopeError(f"undecodable envelope: {exc}") from exc
        return cls.from_doc(doc)


def dedupe_key(env: Envelope) -> tuple[str, int, str, str] | None:
    """Idempotency key for at-least-once transports.

    Status reports are periodic snapshots with no round identity, and model
    replies are read responses the server may legitimately send several times
    for one experiment (final broadcast plus per-requester copies); both are
    exempt (returning None) rather than wrongly collapsed.
    """
    if env.msg_type in (MSG_STATUS_REPORT, MSG_MODEL_REPLY):
        return None
    return (env.experiment_id, env.round, env.msg_type, env.sender_id)
