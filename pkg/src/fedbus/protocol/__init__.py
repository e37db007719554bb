"""Wire protocol: topics, envelopes, weight codec, ACLs, and brokers."""

from .topics import (
    MSG_TYPES,
    TopicScheme,
    match_topic,
    topic_for,
)
from .envelope import Envelope, EnvelopeError, PROTOCOL_VERSION, dedupe_key
from .codec import (
    CodecError,
    decode_weights,
    encode_weights,
    read_weights_file,
    weights_from_doc,
    weights_to_doc,
    write_weights_file,
)
from .acl import (
    ROLE_CONTROL_CENTER,
    ROLE_OBSERVER,
    ROLE_PARAMETER_SERVER,
    ROLE_PARTICIPANT,
    AclRule,
    NodeIdentity,
    acl_check,
    standard_rules,
)
from .broker import BrokerError, EmbeddedBroker, Subscription

__all__ = [
    "MSG_TYPES",
    "TopicScheme",
    "match_topic",
    "topic_for",
    "Envelope",
    "EnvelopeError",
    "PROTOCOL_VERSION",
    "dedupe_key",
    "CodecError",
    "decode_weights",
    "encode_weights",
    "read_weights_file",
    "write_weights_file",
    "weights_from_doc",
    "weights_to_doc",
    "AclRule",
    "NodeIdentity",
    "acl_check",
    "standard_rules",
    "ROLE_CONTROL_CENTER",
    "ROLE_OBSERVER",
    "ROLE_PARAMETER_SERVER",
    "ROLE_PARTICIPANT",
    "BrokerError",
    "EmbeddedBroker",
    "Subscription",
]
