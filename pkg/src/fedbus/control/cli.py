"""fedctl: operator CLI.

`serve` hosts the control-center HTTP API; every other subcommand is a thin
HTTP client against a running instance, so the CLI and the dashboard always
agree on what they see.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import httpx

DEFAULT_API = os.environ.get("FEDBUS_API", "http://127.0.0.1:8000")


def _client(api: str) -> httpx.Client:
    return httpx.Client(base_url=api, timeout=60.0)


def _die(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from ..runtime import FederationConfig, runtime_for
    from .api import create_app
    from .service import ControlCenter

    federation = FederationConfig.load(args.federation)
    runtime = runtime_for(federation, args.client_id)
    cc = ControlCenter(runtime, federation)
    cc.start()
    app = create_app(cc, model_dir=args.model_dir)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    finally:
        cc.stop()
    return 0


def cmd_submit(args: argparse.Namespace) -> int:
    with open(args.spec_file, encoding="utf-8") as fh:
        doc = json.load(fh)
    with _client(args.api) as client:
        resp = client.post("/api/experiments", json=doc)
    if resp.status_code == 201:
        print(resp.json()["experiment_id"])
        return 0
    if resp.status_code == 400:
        body = resp.json()
        print("rejected: validation failed", file=sys.stderr)
        for err in body.get("validation", {}).get("errors", []):
            print(f"  {err['path']}: {err['message']}", file=sys.stderr)
        return 1
    return _die(f"{resp.status_code}: {resp.json().get('detail', resp.text)}")


def _print_status(client: httpx.Client) -> None:
    network = client.get("/api/network").json()["nodes"]
    print(f"{'node':24} {'role':20} {'state':12} {'round':>5}  stale")
    for node in network:
        print(f"{node['client_id']:24} {node['role']:20} {node['state']:12} "
              f"{node['round']:>5}  {'yes' if node['stale'] else 'no'}")
    experiments = client.get("/api/experiments").json()["experiments"]
    if experiments:
        print()
        print(f"{'experiment':38} {'status':14} {'round':>5} {'algorithm':10}")
        for exp in experiments:
            print(f"{exp['experiment_id']:38} {exp['status']:14} "
                  f"{exp.get('last_round', 0):>5} {exp.get('algorithm') or '-':10}")


def cmd_status(args: argparse.Namespace) -> int:
    with _client(args.api) as client:
        if args.experiment_id:
            resp = client.get(f"/api/experiments/{args.experiment_id}")
            if resp.status_code == 404:
                return _die("unknown experiment")
            print(json.dumps(resp.json(), indent=2, sort_keys=True))
        else:
            _print_status(client)
    return 0


def cmd_watch(args: argparse.Namespace) -> int:
    with _client(args.api) as client:
        try:
            while True:
                print("\x1b[2J\x1b[H", end="")
                _print_status(client)
                time.sleep(args.interval)
        except KeyboardInterrupt:
            return 0


def cmd_fetch_model(args: argparse.Namespace) -> int:
    with _client(args.api) as client:
        resp = client.post(f"/api/experiments/{args.experiment_id}/model")
    if resp.status_code == 200:
        print(resp.json()["path"])
        return 0
    return _die(f"{resp.status_code}: {resp.json().get('detail', resp.text)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedctl",
                                     description="federation control CLI")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the control-center service")
    serve.add_argument("--federation", required=True,
                       help="federation config JSON")
    serve.add_argument("--client-id", default="control-center")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--model-dir", default="models")
    serve.set_defaults(func=cmd_serve)

    submit = sub.add_parser("submit", help="submit an experiment spec")
    submit.add_argument("spec_file")
    submit.add_argument("--api", default=DEFAULT_API)
    submit.set_defaults(func=cmd_submit)

    status = sub.add_parser("status", help="show network and experiments")
    status.add_argument("experiment_id", nargs="?")
    status.add_argument("--api", default=DEFAULT_API)
    status.set_defaults(func=cmd_status)

    watch = sub.add_parser("watch", help="continuously refresh status")
    watch.add_argument("--interval", type=float, default=2.0)
    watch.add_argument("--api", default=DEFAULT_API)
    watch.set_defaults(func=cmd_watch)

    fetch = sub.add_parser("fetch-model", help="pull a finished global model")
    fetch.add_argument("experiment_id")
    fetch.add_argument("--api", default=DEFAULT_API)
    fetch.set_defaults(func=cmd_fetch_model)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
