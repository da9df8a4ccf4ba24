"""Binary checkpoint container for weights, thresholds, and masks.

Layout, all integers little-endian u32: magic ``FTHR``, format version,
record count, then per record: name length, UTF-8 name, rank, one u32 per
dim, raw element bytes. There is no dtype field; records named ``*/mask``
hold u8 elements, every other record holds 32-bit little-endian reals. The
writer emits records in insertion order and the reader preserves it, so a
save/load/save cycle is byte-identical.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

__all__ = [
    "MASK_SUFFIX",
    "save_checkpoint",
    "load_checkpoint",
    "model_records",
    "restore_model",
    "snapshot_records",
]

MAGIC = b"FTHR"
VERSION = 1
MASK_SUFFIX = "/mask"


def save_checkpoint(path, records: dict[str, np.ndarray]) -> None:
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<II", VERSION, len(records))
    for name, arr in records.items():
        arr = np.asarray(arr)
        if name.endswith(MASK_SUFFIX):
            if arr.dtype == np.bool_:
                arr = arr.astype(np.uint8)
            elif arr.dtype != np.uint8:
                raise ValueError(f"mask record {name!r} must be bool or u8, got {arr.dtype}")
            wire = arr.astype("<u1", copy=False)
        else:
            if arr.dtype != np.float32:
                raise ValueError(f"record {name!r} must be float32, got {arr.dtype}")
            wire = arr.astype("<f4", copy=False)
        encoded = name.encode("utf-8")
        payload += struct.pack("<I", len(encoded))
        payload += encoded
        payload += struct.pack("<I", arr.ndim)
        if arr.ndim:
            payload += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += wire.tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(payload)


def load_checkpoint(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    offset = 0

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise FormatError(
                f"truncated checkpoint: {what} needs {n} bytes at offset {offset}, "
                f"file ends at {len(blob)}"
            )
        chunk = blob[offset : offset + n]
        offset += n
        return chunk

    magic = take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version} at offset 4")

    records: dict[str, np.ndarray] = {}
    for i in range(count):
        (name_len,) = struct.unpack("<I", take(4, f"record {i} name length"))
        name = take(name_len, f"record {i} name").decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, f"record {i} rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, f"record {i} dims")) if rank else ()
        n_elems = math.prod(dims)
        if name.endswith(MASK_SUFFIX):
            dtype, itemsize = np.uint8, 1
        else:
            dtype, itemsize = np.float32, 4
        raw = take(n_elems * itemsize, f"record {i} ({name}) data")
        if name in records:
            raise FormatError(f"duplicate record name {name!r} (record {i})")
        records[name] = np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")) \
            .reshape(dims).astype(dtype)
    if offset != len(blob):
        raise FormatError(f"{len(blob) - offset} trailing bytes at offset {offset}")
    return records


def model_records(model, states=None) -> dict[str, np.ndarray]:
    """Flatten a model (and optional prune state) into checkpoint records."""
    records: dict[str, np.ndarray] = {}
    for layer in model.layers:
        records[f"{layer.name}/weight"] = layer.weight.data
        records[f"{layer.name}/bias"] = layer.bias.data
    for state in states or []:
        if state.threshold is not None:
            records[f"{state.name}/threshold"] = np.array([state.threshold], dtype=np.float32)
        if state.mask is not None:
            records[f"{state.name}{MASK_SUFFIX}"] = state.mask.astype(np.uint8)
    return records


def restore_model(model, records: dict[str, np.ndarray]) -> None:
    """Copy weight and bias records back into a model of matching shape."""
    for layer in model.layers:
        for part in ("weight", "bias"):
            key = f"{layer.name}/{part}"
            if key not in records:
                raise FormatError(f"checkpoint is missing record {key!r}")
            value = records[key]
            target = getattr(layer, part)
            if value.shape != target.shape:
                raise FormatError(
                    f"record {key!r} has shape {value.shape}, model expects {target.shape}"
                )
            target.data[...] = value


def snapshot_records(snapshots) -> dict[str, np.ndarray]:
    """Flatten per-epoch mask snapshots into one container's records."""
    records: dict[str, np.ndarray] = {}
    for snap in snapshots:
        for layer_name, mask in snap.masks.items():
            records[f"epoch{snap.epoch:04d}/{layer_name}{MASK_SUFFIX}"] = \
                np.asarray(mask).astype(np.uint8)
    return records
