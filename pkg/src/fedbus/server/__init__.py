"""Federation coordinator: round orchestration, aggregation, artifacts."""

from .artifacts import ArtifactStore
from .server import ParameterServer

__all__ = ["ArtifactStore", "ParameterServer"]
