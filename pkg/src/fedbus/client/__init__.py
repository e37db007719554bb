"""Client node agent: local training, evaluation, model receipt."""

from .loaders import (
    DataLoaderSpec,
    LoadedData,
    clear_memory_datasets,
    register_memory_dataset,
    resolve_loader,
)
from .node import ClientConfig, ClientNode

__all__ = [
    "DataLoaderSpec",
    "LoadedData",
    "clear_memory_datasets",
    "register_memory_dataset",
    "resolve_loader",
    "ClientConfig",
    "ClientNode",
]
