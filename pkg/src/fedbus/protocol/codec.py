"""Bit-exact weight serialization.

Values travel as raw little-endian bytes next to a JSON manifest listing
(name, shape, dtype) per block. Floats never pass through text, so NaN
payloads and signed zeros survive the round trip unchanged.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from ..model.tensors import ModelWeights, TensorBlock

_NP_DTYPE = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_ITEM_SIZE = {"f32": 4, "f64": 8}

FILE_MAGIC = b"FWT1"


class CodecError(ValueError):
    pass


def encode_weights(weights: ModelWeights) -> tuple[dict, bytes]:
    entries = []
    chunks = []
    for block in weights:
        entries.append({"name": block.name, "shape": list(block.shape), "dtype": block.dtype})
        chunks.append(np.ascontiguousarray(block.values, dtype=_NP_DTYPE[block.dtype]).tobytes())
    return {"entries": entries}, b"".join(chunks)


def decode_weights(manifest: dict, payload: bytes) -> ModelWeights:
    if not isinstance(manifest, dict) or "entries" not in manifest:
        raise CodecError("manifest must be an object with an entries list")
    entries = manifest["entries"]
    if not isinstance(entries, list):
        raise CodecError("manifest entries must be a list")
    expected = 0
    for e in entries:
        if e.get("dtype") not in _ITEM_SIZE:
            raise CodecError(f"unknown dtype {e.get('dtype')!r}")
        count = 1
        for dim in e["shape"]:
            count *= int(dim)
        expected += count * _ITEM_SIZE[e["dtype"]]
    if expected != len(payload):
        raise CodecError(f"payload is {len(payload)} bytes, manifest declares {expected}")
    blocks = []
    offset = 0
    for e in entries:
        count = 1
        for dim in e["shape"]:
            count *= int(dim)
        nbytes = count * _ITEM_SIZE[e["dtype"]]
        values = np.frombuffer(payload, dtype=_NP_DTYPE[e["dtype"]], count=count, offset=offset)
        offset += nbytes
        blocks.append(
            TensorBlock(
                name=e["name"],
                shape=tuple(int(d) for d in e["shape"]),
                dtype=e["dtype"],
                values=np.array(values, dtype=_NP_DTYPE[e["dtype"]].newbyteorder("=")),
            )
        )
    return ModelWeights(blocks=blocks)


def weights_to_doc(weights: ModelWeights) -> dict:
    """JSON-embeddable form used inside envelope payloads."""
    manifest, payload = encode_weights(weights)
    return {"manifest": manifest, "data": base64.b64encode(payload).decode("ascii")}


def weights_from_doc(doc: dict) -> ModelWeights:
    if not isinstance(doc, dict) or "manifest" not in doc or "data" not in doc:
        raise CodecError("weight document requires manifest and data fields")
    try:
        payload = base64.b64decode(doc["data"], validate=True)
    except Exception as exc:
        raise CodecError(f"invalid base64 weight data: {exc}") from exc
    return decode_weights(doc["manifest"], payload)


def write_weights_file(path, weights: ModelWeights) -> None:
    """Container layout: magic, u32-LE manifest length, manifest JSON, raw payload."""
    manifest, payload = encode_weights(weights)
    blob = json.dumps(manifest, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FILE_MAGIC)
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        fh.write(payload)


def read_weights_file(path) -> ModelWeights:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FILE_MAGIC:
            raise CodecError(f"not a weight file: bad magic {magic!r}")
        header = fh.read(4)
        if len(header) < 4:
            raise CodecError("truncated weight file header")
        length = int.from_bytes(header, "little")
        blob = fh.read(length)
        if len(blob) < length:
            raise CodecError("truncated weight file manifest")
        try:
            manifest = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CodecError(f"corrupt manifest: {exc}") from exc
        payload = fh.read()
    return decode_weights(manifest, payload)
