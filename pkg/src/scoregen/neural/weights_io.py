"""Binary weight container.

Layout (all integers little-endian)::

    b"LWGW" | u32 version | u32 header length | UTF-8 JSON header
    | tensor payload (float64, row-major) | u32 CRC-32 of the payload

The header holds the model config and a directory of
``{"name", "shape", "offset"}`` entries, offsets relative to the payload start.
"""

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import (
    ShapeError,
    WeightChecksumError,
    WeightFileError,
    WeightShapeError,
    WeightVersionError,
)
from .lstm import ModelConfig, ModelWeights

MAGIC = b"LWGW"
VERSION = 1
_PREFIX = struct.Struct("<4sII")


def dumps_weights(weights):
    weights.validate()
    directory = []
    chunks = []
    offset = 0
    for name, arr in weights.named_tensors():
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)
    header = json.dumps(
        {"config": weights.config.to_dict(), "tensors": directory, "payload_bytes": len(payload)},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    return (_PREFIX.pack(MAGIC, VERSION, len(header)) + header + payload
            + struct.pack("<I", zlib.crc32(payload)))


def loads_weights(blob):
    if len(blob) < _PREFIX.size:
        raise WeightChecksumError("weight file is truncated")
    magic, version, header_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise WeightFileError(f"not a weight file (magic {magic!r})")
    if version != VERSION:
        raise WeightVersionError(f"weight file version {version}, this build reads {VERSION}")
    start = _PREFIX.size + header_len
    try:
        header = json.loads(blob[_PREFIX.size:start].decode("utf-8"))
        payload_len = int(header["payload_bytes"])
        config = ModelConfig.from_dict(header["config"])
        directory = header["tensors"]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise WeightFileError(f"unreadable weight header: {exc}") from exc
    if len(blob) != start + payload_len + 4:
        raise WeightChecksumError(
            f"weight file is {len(blob)} bytes, header implies {start + payload_len + 4}")
    payload = blob[start:start + payload_len]
    (stored,) = struct.unpack_from("<I", blob, start + payload_len)
    if zlib.crc32(payload) != stored:
        raise WeightChecksumError("payload CRC-32 mismatch")

    tensors = {}
    for entry in directory:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        lo = entry["offset"]
        if lo < 0 or lo + 8 * count > payload_len:
            raise WeightShapeError(f"tensor {entry['name']} lies outside the payload")
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=lo).reshape(shape)
        tensors[entry["name"]] = arr.astype(np.float64)
    try:
        weights = ModelWeights.from_named(tensors, config)
        weights.validate()
    except KeyError as exc:
        raise WeightShapeError(f"weight file lacks tensor {exc}") from exc
    except ShapeError as exc:
        raise WeightShapeError(str(exc)) from exc
    return weights


def save_weights(weights, path):
    Path(path).write_bytes(dumps_weights(weights))


def load_weights(path, sequence_length=None, vocab_size=None):
    """Read a weight file, optionally checking it fits the session's shapes."""
    weights = loads_weights(Path(path).read_bytes())
    cfg = weights.config
    if sequence_length is not None and sequence_length != cfg.sequence_length:
        raise WeightShapeError(
            f"weights expect windows of length {cfg.sequence_length}, session uses {sequence_length}")
    if vocab_size is not None and vocab_size != cfg.vocab_size:
        raise WeightShapeError(
            f"weights expect a vocabulary of {cfg.vocab_size} tokens, session has {vocab_size}")
    return weights
