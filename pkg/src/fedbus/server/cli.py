"""fedps: run a parameter-server process against a broker."""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading

from ..runtime import FederationConfig, runtime_for
from .server import ParameterServer


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fedps", description="parameter server")
    parser.add_argument("--federation", required=True, help="federation config JSON")
    parser.add_argument("--client-id", default="parameter-server")
    parser.add_argument("--artifacts", default="artifacts",
                        help="experiment artifact root directory")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    federation = FederationConfig.load(args.federation)
    runtime = runtime_for(federation, args.client_id)
    server = ParameterServer(runtime, federation.participants(), args.artifacts)
    server.start()

    done = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: done.set())
    done.wait()
    server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
