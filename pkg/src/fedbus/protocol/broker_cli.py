"""fedbroker: host the embedded broker behind the MQTT front-end.

The access-control table is derived entirely from the federation config, so
a node list is the only input needed to stand up a federation bus.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading

from ..runtime import FederationConfig
from .acl import standard_rules
from .broker import EmbeddedBroker
from .mqtt_server import MqttFrontend

log = logging.getLogger(__name__)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fedbroker",
                                     description="federation message broker")
    parser.add_argument("--federation", required=True, help="federation config JSON")
    parser.add_argument("--host", default=None,
                        help="bind address (default: from config)")
    parser.add_argument("--port", type=int, default=None,
                        help="bind port (default: from config)")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    federation = FederationConfig.load(args.federation)
    rules = standard_rules(federation.scheme, federation.nodes)
    broker = EmbeddedBroker(federation.nodes, rules)
    frontend = MqttFrontend(
        broker,
        host=args.host if args.host is not None else federation.broker_host,
        port=args.port if args.port is not None else federation.broker_port,
    )
    frontend.start()
    log.info("broker listening on %s:%d (%d identities)",
             frontend.host, frontend.port, len(federation.nodes))

    done = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: done.set())
    done.wait()
    frontend.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
