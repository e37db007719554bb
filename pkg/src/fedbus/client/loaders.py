"""Local data loading for client nodes.

A loader spec resolves at node startup, never at round time: a node that
cannot produce its datasets should fail before it joins the federation.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..model.data import (
    CsvSchema,
    DataError,
    Dataset,
    STROKE_SCHEMA,
    load_csv_dataset,
    stratified_split,
    synth_dataset,
)

_NAMED_SCHEMAS = {"stroke": STROKE_SCHEMA}

# In-process handoff for harnesses that pre-split data themselves.
_MEMORY_DATASETS: dict[str, "LoadedData"] = {}


class LoaderError(ValueError):
    pass


def register_memory_dataset(name: str, train: Dataset | None,
                            eval_split: Dataset) -> None:
    _MEMORY_DATASETS[name] = LoadedData(train=train, eval=eval_split)


def clear_memory_datasets() -> None:
    _MEMORY_DATASETS.clear()


@dataclass(frozen=True)
class DataLoaderSpec:
    """Where a node's data comes from.

    kind "csv": ``path`` plus a named or inline column schema.
    kind "synthetic": generator parameters, useful for tests and demos.
    kind "memory": ``path`` names a dataset registered in this process
    via ``register_memory_dataset`` (splitting already done by the caller).
    ``eval_fraction`` of the data (stratified) is held out for local
    evaluation; participants train on the rest, observers evaluate only.
    """

    kind: str
    path: str | None = None
    schema: str = "stroke"
    eval_fraction: float = 0.2
    split_seed: int = 0
    standardize: bool = True
    n_samples: int = 1000
    prevalence: float = 0.1
    n_features: int = 10
    separation: float = 3.0
    synth_seed: int = 0

    def to_doc(self) -> dict:
        doc = {"kind": self.kind, "eval_fraction": self.eval_fraction,
               "split_seed": self.split_seed}
        if self.kind == "csv":
            doc.update({"path": self.path, "schema": self.schema,
                        "standardize": self.standardize})
        elif self.kind == "memory":
            doc["path"] = self.path
        else:
            doc.update({
                "n_samples": self.n_samples,
                "prevalence": self.prevalence,
                "n_features": self.n_features,
                "separation": self.separation,
                "synth_seed": self.synth_seed,
            })
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "DataLoaderSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise LoaderError(f"unknown loader fields {sorted(unknown)}")
        return cls(**doc)


@dataclass
class LoadedData:
    train: Dataset | None
    eval: Dataset


def resolve_loader(spec: DataLoaderSpec, require_train: bool = True) -> LoadedData:
    """Materialize the datasets; raises LoaderError on any problem."""
    if spec.kind == "csv":
        if not spec.path:
            raise LoaderError("csv loader requires a path")
        schema = _NAMED_SCHEMAS.get(spec.schema)
        if schema is None:
            raise LoaderError(f"unknown schema {spec.schema!r}")
        try:
            full = load_csv_dataset(spec.path, schema, standardize=spec.standardize)
        except (OSError, DataError) as exc:
            raise LoaderError(f"cannot load {spec.path}: {exc}") from exc
    elif spec.kind == "synthetic":
        full = synth_dataset(
            seed=spec.synth_seed,
            n_samples=spec.n_samples,
            prevalence=spec.prevalence,
            n_features=spec.n_features,
            separation=spec.separation,
        )
    elif spec.kind == "memory":
        data = _MEMORY_DATASETS.get(spec.path or "")
        if data is None:
            raise LoaderError(f"no registered dataset {spec.path!r}")
        if require_train and (data.train is None or len(data.train) == 0):
            raise LoaderError("empty training split")
        return data
    else:
        raise LoaderError(f"unknown loader kind {spec.kind!r}")

    try:
        train, eval_split = stratified_split(full, spec.eval_fraction, spec.split_seed)
    except DataError as exc:
        raise LoaderError(str(exc)) from exc
    if require_train and len(train) == 0:
        raise LoaderError("empty training split")
    return LoadedData(train=train, eval=eval_split)


def schema_by_name(name: str) -> CsvSchema:
    schema = _NAMED_SCHEMAS.get(name)
    if schema is None:
        raise LoaderError(f"unknown schema {name!r}")
    return schema
