"""Named tensor blocks and the weight bundles exchanged between nodes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

DTYPES = {"f32": np.float32, "f64": np.float64}
DTYPE_SIZES = {"f32": 4, "f64": 8}


class StructureMismatch(ValueError):
    """Two weight bundles do not share block names, shapes and dtypes."""


@dataclass
class TensorBlock:
    """One named parameter tensor; values are stored flat, row-major."""

    name: str
    shape: tuple[int, ...]
    dtype: str
    values: np.ndarray

    def __post_init__(self):
        if self.dtype not in DTYPES:
            raise ValueError(f"unknown dtype {self.dtype!r}")
        if any(d <= 0 for d in self.shape):
            raise ValueError(f"block {self.name!r}: non-positive dim in shape {self.shape}")
        self.shape = tuple(int(d) for d in self.shape)
        self.values = np.ascontiguousarray(self.values, dtype=DTYPES[self.dtype]).reshape(-1)
        if self.values.size != math.prod(self.shape):
            raise ValueError(
                f"block {self.name!r}: {self.values.size} values for shape {self.shape}"
            )

    @property
    def array(self) -> np.ndarray:
        """Values viewed in their declared shape (no copy)."""
        return self.values.reshape(self.shape)

    def copy(self) -> "TensorBlock":
        return TensorBlock(self.name, self.shape, self.dtype, self.values.copy())


@dataclass
class ModelWeights:
    """Ordered collection of uniquely named tensor blocks.

    The block order is canonical (layer order, weight before bias), so two
    bundles built from the same model config line up index by index.
    """

    blocks: list[TensorBlock] = field(default_factory=list)

    def __post_init__(self):
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate block names: {names}")
        dtypes = {b.dtype for b in self.blocks}
        if len(dtypes) > 1:
            raise ValueError(f"mixed dtypes in one bundle: {sorted(dtypes)}")

    def __iter__(self) -> Iterator[TensorBlock]:
        return iter(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, name: str) -> TensorBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    @property
    def dtype(self) -> str:
        return self.blocks[0].dtype if self.blocks else "f64"

    def n_params(self) -> int:
        return sum(b.values.size for b in self.blocks)

    def same_structure(self, other: "ModelWeights") -> bool:
        if len(self.blocks) != len(other.blocks):
            return False
        return all(
            a.name == b.name and a.shape == b.shape and a.dtype == b.dtype
            for a, b in zip(self.blocks, other.blocks)
        )

    def require_same_structure(self, other: "ModelWeights", what: str = "operand") -> None:
        if not self.same_structure(other):
            mine = [(b.name, b.shape, b.dtype) for b in self.blocks]
            theirs = [(b.name, b.shape, b.dtype) for b in other.blocks]
            raise StructureMismatch(f"{what} structure {theirs} does not match {mine}")

    def copy(self) -> "ModelWeights":
        return ModelWeights([b.copy() for b in self.blocks])

    def astype(self, dtype: str) -> "ModelWeights":
        return ModelWeights(
            [TensorBlock(b.name, b.shape, dtype, b.values.astype(DTYPES[dtype])) for b in self.blocks]
        )

    def zeros_like(self) -> "ModelWeights":
        return ModelWeights(
            [TensorBlock(b.name, b.shape, b.dtype, np.zeros_like(b.values)) for b in self.blocks]
        )

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "ModelWeights":
        return ModelWeights(
            [TensorBlock(b.name, b.shape, b.dtype, fn(b.values)) for b in self.blocks]
        )

    def zip_map(
        self, other: "ModelWeights", fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ) -> "ModelWeights":
        self.require_same_structure(other)
        return ModelWeights(
            [
                TensorBlock(a.name, a.shape, a.dtype, fn(a.values, b.values))
                for a, b in zip(self.blocks, other.blocks)
            ]
        )

    def add(self, other: "ModelWeights") -> "ModelWeights":
        return self.zip_map(other, np.add)

    def sub(self, other: "ModelWeights") -> "ModelWeights":
        return self.zip_map(other, np.subtract)

    def scale(self, factor: float) -> "ModelWeights":
        return self.map(lambda v: v * factor)

    def allclose(self, other: "ModelWeights", rtol: float = 1e-9, atol: float = 0.0) -> bool:
        if not self.same_structure(other):
            return False
        return all(
            np.allclose(a.values, b.values, rtol=rtol, atol=atol)
            for a, b in zip(self.blocks, other.blocks)
        )

    def equal_bits(self, other: "ModelWeights") -> bool:
        """Bitwise equality, treating NaNs with identical payloads as equal."""
        if not self.same_structure(other):
            return False
        return all(
            a.values.tobytes() == b.values.tobytes()
            for a, b in zip(self.blocks, other.blocks)
        )


def weighted_sum(bundles: list[ModelWeights], coeffs: list[float]) -> ModelWeights:
    """sum_i coeffs[i] * bundles[i], accumulated in listed order."""
    if not bundles:
        raise ValueError("empty bundle list")
    if len(bundles) != len(coeffs):
        raise ValueError("bundles and coeffs differ in length")
    acc = bundles[0].scale(coeffs[0])
    for w, c in zip(bundles[1:], coeffs[1:]):
        acc.require_same_structure(w)
        acc = acc.zip_map(w, lambda a, b: a + c * b)
    return acc
