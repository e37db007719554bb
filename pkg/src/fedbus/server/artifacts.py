"""On-disk experiment artifacts.

Layout under the artifact root:

    experiments/<id>/spec.json
    experiments/<id>/global/latest.weights
    experiments/<id>/global/round_<r>.weights   (bounded history)
    experiments/<id>/clients/<client_id>/latest.weights
    experiments/<id>/metrics.jsonl              (one object per round)
    experiments/<id>/events.log                 (timestamped lines)

Weight files use the binary container from the protocol codec.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from ..model.tensors import ModelWeights
from ..protocol.codec import read_weights_file, write_weights_file
from ..protocol.envelope import utc_now

HISTORY_LIMIT = 16

_ROUND_FILE = re.compile(r"^round_(\d+)\.weights$")


class ArtifactStore:
    def __init__(self, root, history_limit: int = HISTORY_LIMIT):
        self.root = Path(root)
        self.history_limit = history_limit

    def experiment_dir(self, experiment_id: str) -> Path:
        return self.root / "experiments" / experiment_id

    def prepare(self, experiment_id: str, spec_doc: dict) -> None:
        exp = self.experiment_dir(experiment_id)
        (exp / "global").mkdir(parents=True, exist_ok=True)
        (exp / "clients").mkdir(parents=True, exist_ok=True)
        with open(exp / "spec.json", "w", encoding="utf-8") as fh:
            json.dump(spec_doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_global(self, experiment_id: str, round_no: int, weights: ModelWeights,
                     best_round: int | None = None) -> str:
        """Store the round's global model, refresh latest, prune history.

        Returns the storage key ("round_<r>") used by scheduler best-refs.
        """
        gdir = self.experiment_dir(experiment_id) / "global"
        write_weights_file(gdir / f"round_{round_no}.weights", weights)
        write_weights_file(gdir / "latest.weights", weights)
        self._prune(gdir, keep_round=best_round)
        return f"round_{round_no}"

    def _prune(self, gdir: Path, keep_round: int | None) -> None:
        rounds = []
        for path in gdir.iterdir():
            m = _ROUND_FILE.match(path.name)
            if m:
                rounds.append((int(m.group(1)), path))
        rounds.sort()
        keep = {r for r, _ in rounds[-self.history_limit :]}
        if keep_round is not None:
            keep.add(keep_round)
        for r, path in rounds:
            if r not in keep:
                path.unlink()

    def read_global(self, experiment_id: str, key: str = "latest") -> ModelWeights:
        gdir = self.experiment_dir(experiment_id) / "global"
        name = "latest.weights" if key == "latest" else f"{key}.weights"
        return read_weights_file(gdir / name)

    def write_client_latest(self, experiment_id: str, client_id: str,
                            weights: ModelWeights) -> None:
        cdir = self.experiment_dir(experiment_id) / "clients" / client_id
        cdir.mkdir(parents=True, exist_ok=True)
        write_weights_file(cdir / "latest.weights", weights)

    def append_metrics(self, experiment_id: str, record: dict) -> None:
        path = self.experiment_dir(experiment_id) / "metrics.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def append_event(self, experiment_id: str, message: str) -> None:
        path = self.experiment_dir(experiment_id) / "events.log"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(f"{utc_now()} {message}\n")

    def read_metrics(self, experiment_id: str) -> list[dict]:
        path = self.experiment_dir(experiment_id) / "metrics.jsonl"
        if not path.exists():
            return []
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def read_events(self, experiment_id: str) -> list[str]:
        path = self.experiment_dir(experiment_id) / "events.log"
        if not path.exists():
            return []
        with open(path, encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh]

    def global_rounds_on_disk(self, experiment_id: str) -> list[int]:
        gdir = self.experiment_dir(experiment_id) / "global"
        if not gdir.exists():
            return []
        out = []
        for path in gdir.iterdir():
            m = _ROUND_FILE.match(path.name)
            if m:
                out.append(int(m.group(1)))
        return sorted(out)
