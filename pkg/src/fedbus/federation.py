"""Single-process federation assembly.

Wires an embedded broker, one parameter server, any number of client nodes,
and a control center together over in-memory transports (or, optionally,
over real MQTT sockets through the front-end). Tests and the benchmark
harness drive complete federations through this instead of shelling out to
the per-role CLIs.
"""

from __future__ import annotations

import time
from pathlib import Path

from .client.node import ClientConfig, ClientNode
from .control.service import ControlCenter, SubmitOutcome
from .protocol.acl import (
    NodeIdentity,
    ROLE_CONTROL_CENTER,
    ROLE_OBSERVER,
    ROLE_PARAMETER_SERVER,
    ROLE_PARTICIPANT,
    standard_rules,
)
from .protocol.broker import EmbeddedBroker
from .protocol.mqtt_server import MqttFrontend
from .runtime import (
    FederationConfig,
    LocalTransport,
    MqttTransport,
    NodeRuntime,
)
from .server.server import ParameterServer

PS_ID = "parameter-server"
CC_ID = "control-center"

TERMINAL_STATUSES = ("completed", "stopped_early", "failed", "rejected")

_NODE_ROLE = {
    "participant": ROLE_PARTICIPANT,
    "observer": ROLE_OBSERVER,
}


class LocalFederation:
    """Everything needed to run experiments end to end in one process.

    ``start_clients`` limits which configured clients actually come up;
    the rest stay registered (ACL identity, quorum accounting) but silent,
    which is how ack-timeout scenarios are staged.
    """

    def __init__(
        self,
        client_configs: list[ClientConfig],
        artifact_root,
        prefix: str = "fed/local",
        heartbeat_interval: float = 0.5,
        cc_reply_timeout: float = 10.0,
        use_mqtt: bool = False,
        start_clients: list[str] | None = None,
    ):
        self.client_configs = list(client_configs)
        self.artifact_root = Path(artifact_root)
        self.use_mqtt = use_mqtt
        self._start_ids = (set(start_clients) if start_clients is not None
                           else {c.client_id for c in client_configs})

        nodes = [
            NodeIdentity(PS_ID, ROLE_PARAMETER_SERVER),
            NodeIdentity(CC_ID, ROLE_CONTROL_CENTER),
        ]
        for cfg in client_configs:
            nodes.append(NodeIdentity(cfg.client_id, _NODE_ROLE[cfg.role]))
        self.config = FederationConfig(
            prefix=prefix, nodes=nodes, heartbeat_interval=heartbeat_interval,
        )
        rules = standard_rules(self.config.scheme, nodes)
        self.broker = EmbeddedBroker(nodes, rules)
        self.frontend: MqttFrontend | None = None
        if use_mqtt:
            self.frontend = MqttFrontend(self.broker)
            self.frontend.start()

        self.server = ParameterServer(
            self._runtime(PS_ID),
            self.config.participants(),
            self.artifact_root / "server",
        )
        self.clients: dict[str, ClientNode] = {}
        for cfg in client_configs:
            if cfg.client_id in self._start_ids:
                self.clients[cfg.client_id] = ClientNode(self._runtime(cfg.client_id), cfg)
        self.cc = ControlCenter(self._runtime(CC_ID), self.config,
                                reply_timeout=cc_reply_timeout)

    def _runtime(self, client_id: str) -> NodeRuntime:
        identity = next(n for n in self.config.nodes if n.client_id == client_id)
        if self.use_mqtt:
            transport = MqttTransport(self.frontend.host, self.frontend.port, client_id)
        else:
            transport = LocalTransport(self.broker, client_id)
        return NodeRuntime(identity, self.config.scheme, transport,
                           self.config.heartbeat_interval)

    def start(self) -> None:
        self.server.start()
        for node in self.clients.values():
            node.start()
        self.cc.start()

    def stop(self) -> None:
        self.cc.stop()
        for node in self.clients.values():
            node.stop()
        self.server.stop()
        if self.frontend is not None:
            self.frontend.stop()

    def __enter__(self) -> "LocalFederation":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    # --------------------------------------------------------- conveniences

    def submit(self, request_doc: dict, timeout: float | None = None) -> SubmitOutcome:
        return self.cc.submit_experiment(request_doc, timeout=timeout)

    def wait_terminal(self, experiment_id: str, timeout: float = 120.0) -> dict:
        """Poll the CC view until the experiment reaches a terminal status."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            exp = self.cc.get_experiment(experiment_id)
            if exp is not None and exp["status"] in TERMINAL_STATUSES:
                return exp
            time.sleep(0.05)
        raise TimeoutError(f"experiment {experiment_id} still not terminal")

    def run_to_completion(self, request_doc: dict, timeout: float = 120.0) -> dict:
        outcome = self.submit(request_doc)
        if not outcome.accepted:
            raise RuntimeError(f"submission rejected: {outcome.reason}")
        record = self.wait_terminal(outcome.experiment_id, timeout=timeout)
        self.server.wait_idle(timeout=10.0)
        return record

    def server_record(self, experiment_id: str):
        return self.server.records.get(experiment_id)
