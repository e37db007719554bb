"""Role-based topic permissions, default deny.

Rules only ever grant. The standard rule set encodes which node kind may
touch which topic: the control center drives the parameter server, the
server drives participants, observers receive models and report status but
never take part in training.
"""

from __future__ import annotations

from dataclasses import dataclass

from .topics import (
    T_CONTROL_CENTER,
    T_JOB_REPLIES,
    T_JOB_REQUESTS,
    T_MODEL_REPLIES,
    T_MODEL_REQUESTS,
    T_PS_REPLIES,
    T_STATUS_REPORTS,
    TopicScheme,
    match_topic,
)

ROLE_PARAMETER_SERVER = "parameter_server"
ROLE_PARTICIPANT = "client_participant"
ROLE_OBSERVER = "client_observer"
ROLE_CONTROL_CENTER = "control_center"

ROLES = frozenset(
    {ROLE_PARAMETER_SERVER, ROLE_PARTICIPANT, ROLE_OBSERVER, ROLE_CONTROL_CENTER}
)


class AclError(ValueError):
    pass


@dataclass(frozen=True)
class NodeIdentity:
    client_id: str
    role: str

    def __post_init__(self):
        if not self.client_id:
            raise AclError("client_id must be non-empty")
        if self.role not in ROLES:
            raise AclError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class AclRule:
    client_id: str
    action: str  # publish | subscribe
    topic_pattern: str

    def __post_init__(self):
        if self.action not in ("publish", "subscribe"):
            raise AclError(f"unknown action {self.action!r}")


def acl_check(rules: list[AclRule], identity: NodeIdentity, action: str, topic: str) -> bool:
    return any(
        r.client_id == identity.client_id
        and r.action == action
        and match_topic(r.topic_pattern, topic)
        for r in rules
    )


def standard_rules(scheme: TopicScheme, identities: list[NodeIdentity]) -> list[AclRule]:
    """Least-privilege grants for every declared identity.

    The control center also gets the model-request/model-reply pair under its
    own id: it fetches the finished global model through the same request
    flow clients use.
    """
    seen = set()
    for ident in identities:
        if ident.client_id in seen:
            raise AclError(f"duplicate client_id {ident.client_id!r}")
        seen.add(ident.client_id)
    servers = [i for i in identities if i.role == ROLE_PARAMETER_SERVER]
    if len(servers) != 1:
        raise AclError(f"exactly one parameter server required, found {len(servers)}")

    def pub(cid: str, rel: str) -> AclRule:
        return AclRule(cid, "publish", scheme.absolute(rel))

    def sub(cid: str, rel: str) -> AclRule:
        return AclRule(cid, "subscribe", scheme.absolute(rel))

    rules: list[AclRule] = []
    for ident in identities:
        cid = ident.client_id
        if ident.role == ROLE_CONTROL_CENTER:
            rules += [
                pub(cid, T_CONTROL_CENTER),
                sub(cid, T_PS_REPLIES),
                sub(cid, f"{T_STATUS_REPORTS}/+"),
                pub(cid, f"{T_MODEL_REQUESTS}/{cid}"),
                sub(cid, T_MODEL_REPLIES),
                sub(cid, f"{T_MODEL_REPLIES}/{cid}"),
            ]
        elif ident.role == ROLE_PARAMETER_SERVER:
            rules += [
                sub(cid, T_CONTROL_CENTER),
                sub(cid, f"{T_JOB_REPLIES}/+"),
                sub(cid, f"{T_MODEL_REQUESTS}/+"),
                pub(cid, T_PS_REPLIES),
                pub(cid, T_JOB_REQUESTS),
                pub(cid, T_MODEL_REPLIES),
                pub(cid, f"{T_MODEL_REPLIES}/+"),
                pub(cid, f"{T_STATUS_REPORTS}/{cid}"),
            ]
        elif ident.role == ROLE_PARTICIPANT:
            rules += [
                sub(cid, T_JOB_REQUESTS),
                sub(cid, T_MODEL_REPLIES),
                sub(cid, f"{T_MODEL_REPLIES}/{cid}"),
                pub(cid, f"{T_JOB_REPLIES}/{cid}"),
                pub(cid, f"{T_MODEL_REQUESTS}/{cid}"),
                pub(cid, f"{T_STATUS_REPORTS}/{cid}"),
            ]
        elif ident.role == ROLE_OBSERVER:
            rules += [
                sub(cid, T_MODEL_REPLIES),
                sub(cid, f"{T_MODEL_REPLIES}/{cid}"),
                pub(cid, f"{T_MODEL_REQUESTS}/{cid}"),
                pub(cid, f"{T_STATUS_REPORTS}/{cid}"),
            ]
    return rules
