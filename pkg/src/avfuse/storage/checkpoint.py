"""
Checkpoint files.

Layout: 8-byte magic b"AVFCKPT1", u64 little-endian header length, UTF-8 JSON
header, then every parameter array as float32 little-endian in declared order.
"""

import json
import logging
import struct
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from avfuse.exceptions import FormatError
from avfuse.fusion.schemas import ModelDims, ModelParams, param_shapes
from avfuse.storage.files import atomic_write_bytes, read_bytes

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"AVFCKPT1"
CHECKPOINT_VERSION = 1
_PREFIX = struct.Struct("<8sQ")
MAX_HEADER_BYTES = 1 << 20


class ShapeEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    shape: list[int]


class CheckpointHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    version: int
    dims: ModelDims
    seed: int
    epoch: int
    shapes: list[ShapeEntry]


def encode_checkpoint(params: ModelParams, seed: int, epoch: int) -> bytes:
    header = CheckpointHeader(
        version=CHECKPOINT_VERSION,
        dims=params.dims,
        seed=seed,
        epoch=epoch,
        shapes=[ShapeEntry(name=n, shape=list(a.shape)) for n, a in params.arrays.items()],
    )
    header_bytes = header.model_dump_json().encode("utf-8")
    payload = params.flatten().astype("<f4").tobytes()
    return _PREFIX.pack(CHECKPOINT_MAGIC, len(header_bytes)) + header_bytes + payload


def decode_checkpoint(
    data: bytes, expected_dims: ModelDims | None = None, source: str = "<bytes>"
) -> tuple[ModelParams, CheckpointHeader]:
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise FormatError(f"{source}: bad magic")
    if len(data) < _PREFIX.size:
        raise FormatError(f"{source}: truncated header")
    _, header_len = _PREFIX.unpack_from(data)
    if header_len > MAX_HEADER_BYTES or _PREFIX.size + header_len > len(data):
        raise FormatError(f"{source}: truncated header ({header_len} bytes declared)")
    raw_header = data[_PREFIX.size : _PREFIX.size + header_len]

    try:
        fields = json.loads(raw_header)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise FormatError(f"{source}: unreadable header: {e}") from e
    if not isinstance(fields, dict) or fields.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"{source}: version {fields.get('version') if isinstance(fields, dict) else None!r}")
    try:
        header = CheckpointHeader.model_validate(fields)
    except ValidationError as e:
        raise FormatError(f"{source}: invalid header: {e}") from e

    declared = [(entry.name, tuple(entry.shape)) for entry in header.shapes]
    if declared != param_shapes(header.dims):
        raise FormatError(f"{source}: shape list does not match dims {header.dims.model_dump()}")
    if expected_dims is not None and header.dims != expected_dims:
        raise FormatError(f"{source}: dims {header.dims.model_dump()} do not match {expected_dims.model_dump()}")

    payload = memoryview(data)[_PREFIX.size + header_len :]
    count = sum(int(np.prod(shape)) for _, shape in declared)
    if len(payload) != 4 * count:
        raise FormatError(f"{source}: truncated payload ({len(payload)} bytes for {count} values)")
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise FormatError(f"{source}: non-finite parameters")
    params = ModelParams(header.dims).unflatten(flat)
    return params, header


def save_checkpoint(path: str | Path, params: ModelParams, seed: int, epoch: int) -> None:
    atomic_write_bytes(path, encode_checkpoint(params, seed, epoch))
    logger.info(f"💾 Checkpoint saved to {path} ({params.size} parameters)")


def load_checkpoint(path: str | Path, expected_dims: ModelDims | None = None) -> tuple[ModelParams, CheckpointHeader]:
    return decode_checkpoint(read_bytes(path), expected_dims, str(path))
