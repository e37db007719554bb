"""fednode: run a client node (participant or observer)."""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading

from ..runtime import FederationConfig, runtime_for
from .loaders import DataLoaderSpec
from .node import ClientConfig, ClientNode


def load_client_config(path) -> ClientConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return ClientConfig(
        client_id=doc["client_id"],
        role=doc.get("role", "participant"),
        loader=DataLoaderSpec.from_doc(doc["loader"]),
        allow_metrics_upload=doc.get("allow_metrics_upload"),
        artifact_root=doc.get("artifact_root", "."),
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fednode", description="client node")
    parser.add_argument("--federation", required=True, help="federation config JSON")
    parser.add_argument("--node-config", required=True, help="client config JSON")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    config = load_client_config(args.node_config)
    federation = FederationConfig.load(args.federation)
    runtime = runtime_for(federation, config.client_id)
    node = ClientNode(runtime, config)
    node.start()

    done = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: done.set())
    done.wait()
    node.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
