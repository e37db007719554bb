"""Topic scheme: every message type binds to one topic pattern under a
federation prefix, and wildcards follow MQTT matching rules."""

from __future__ import annotations

from dataclasses import dataclass

MSG_EXPERIMENT_REQUEST = "ExperimentRequest"
MSG_EXPERIMENT_ACCEPTED = "ExperimentAccepted"
MSG_EXPERIMENT_REJECTED = "ExperimentRejected"
MSG_JOB_REQUEST = "JobRequest"
MSG_JOB_ACKNOWLEDGE = "JobAcknowledge"
MSG_JOB_REPLY = "JobReply"
MSG_JOB_FAILED = "JobFailed"
MSG_JOB_ABORT = "JobAbort"
MSG_MODEL_REQUEST = "ModelRequest"
MSG_MODEL_REPLY = "ModelReply"
MSG_STATUS_REPORT = "StatusReport"

MSG_TYPES = frozenset(
    {
        MSG_EXPERIMENT_REQUEST,
        MSG_EXPERIMENT_ACCEPTED,
        MSG_EXPERIMENT_REJECTED,
        MSG_JOB_REQUEST,
        MSG_JOB_ACKNOWLEDGE,
        MSG_JOB_REPLY,
        MSG_JOB_FAILED,
        MSG_JOB_ABORT,
        MSG_MODEL_REQUEST,
        MSG_MODEL_REPLY,
        MSG_STATUS_REPORT,
    }
)

T_CONTROL_CENTER = "control-center"
T_PS_REPLIES = "parameter-server-replies"
T_JOB_REQUESTS = "job-requests"
T_JOB_REPLIES = "job-replies"
T_MODEL_REQUESTS = "model-requests"
T_MODEL_REPLIES = "model-replies"
T_STATUS_REPORTS = "status-reports"

# message type -> (relative topic base, needs per-client suffix)
_TOPIC_TABLE = {
    MSG_EXPERIMENT_REQUEST: (T_CONTROL_CENTER, False),
    MSG_EXPERIMENT_ACCEPTED: (T_PS_REPLIES, False),
    MSG_EXPERIMENT_REJECTED: (T_PS_REPLIES, False),
    MSG_JOB_REQUEST: (T_JOB_REQUESTS, False),
    MSG_JOB_ABORT: (T_JOB_REQUESTS, False),
    MSG_JOB_ACKNOWLEDGE: (T_JOB_REPLIES, True),
    MSG_JOB_REPLY: (T_JOB_REPLIES, True),
    MSG_JOB_FAILED: (T_JOB_REPLIES, True),
    MSG_MODEL_REQUEST: (T_MODEL_REQUESTS, True),
    MSG_STATUS_REPORT: (T_STATUS_REPORTS, True),
}


class TopicError(ValueError):
    pass


@dataclass(frozen=True)
class TopicScheme:
    """Federation namespace, e.g. "org/fleet/task-7"."""

    prefix: str

    def __post_init__(self):
        if not self.prefix:
            raise TopicError("topic prefix must be non-empty")
        if "+" in self.prefix or "#" in self.prefix:
            raise TopicError("topic prefix must not contain wildcards")

    def absolute(self, relative: str) -> str:
        return f"{self.prefix}/{relative}"


def topic_for(scheme: TopicScheme, msg_type: str, client_id: str | None = None) -> str:
    """Publication topic for a message type.

    ModelReply is the one type with two legal targets: the broadcast topic
    when client_id is omitted, the per-client topic otherwise.
    """
    if msg_type == MSG_MODEL_REPLY:
        if client_id is None:
            return scheme.absolute(T_MODEL_REPLIES)
        return scheme.absolute(f"{T_MODEL_REPLIES}/{client_id}")
    try:
        base, per_client = _TOPIC_TABLE[msg_type]
    except KeyError:
        raise TopicError(f"unknown message type {msg_type!r}")
    if per_client:
        if not client_id:
            raise TopicError(f"{msg_type} requires a client_id suffix")
        return scheme.absolute(f"{base}/{client_id}")
    return scheme.absolute(base)


def match_topic(pattern: str, topic: str) -> bool:
    """MQTT wildcard matching: '+' spans one level, trailing '#' the rest
    (including the parent level itself)."""
    p_parts = pattern.split("/")
    t_parts = topic.split("/")
    for i, p in enumerate(p_parts):
        if p == "#":
            return i == len(p_parts) - 1
        if i >= len(t_parts):
            return False
        if p != "+" and p != t_parts[i]:
            return False
    return len(p_parts) == len(t_parts)
