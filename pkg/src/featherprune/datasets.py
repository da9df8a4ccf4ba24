"""Dataset ingestion: IDX image files and seeded synthetic Gaussian blobs.

Both sources resolve to a :class:`SplitDataset` of float32 feature arrays and
int64 labels, split train/val by a leading fraction (data order is preserved;
blob labels are assigned round-robin so a prefix split stays class-balanced).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, FormatError
from .seeding import DATA_STREAM, mix_seed
from .tensor import Tensor

__all__ = [
    "IDX_IMAGES_MAGIC",
    "IDX_LABELS_MAGIC",
    "DatasetDescriptor",
    "SplitDataset",
    "load_idx",
    "synth_blobs",
    "load_dataset",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class DatasetDescriptor:
    """Where the data comes from: IDX files on disk or a seeded generator."""

    kind: str  # "idx" or "blobs"
    split: float = 0.8
    images_path: Optional[str] = None
    labels_path: Optional[str] = None
    classes: int = 10
    dims: int = 64
    samples: int = 4096
    noise: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("idx", "blobs"):
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if not 0.0 < self.split < 1.0:
            raise ConfigError(f"train split must be in (0, 1), got {self.split}")
        if self.kind == "idx":
            if not self.images_path or not self.labels_path:
                raise ConfigError("idx datasets need both images and labels paths")
        else:
            if self.classes < 2:
                raise ConfigError(f"blobs need >= 2 classes, got {self.classes}")
            if self.dims < 2:
                raise ConfigError(f"blobs need >= 2 dims, got {self.dims}")
            if self.samples < self.classes:
                raise ConfigError("fewer samples than classes")
            if self.noise < 0:
                raise ConfigError(f"noise must be nonnegative, got {self.noise}")


@dataclass
class SplitDataset:
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    num_classes: int
    input_shape: tuple


def _read_header(blob: bytes, n_fields: int, path, expected_magic: int) -> tuple:
    header_len = 4 * n_fields
    if len(blob) < header_len:
        raise FormatError(
            f"{path}: truncated header, needed {header_len} bytes, file ends at {len(blob)}"
        )
    fields = struct.unpack_from(f">{n_fields}I", blob, 0)
    if fields[0] != expected_magic:
        raise FormatError(
            f"{path}: bad magic 0x{fields[0]:08x} at offset 0, expected 0x{expected_magic:08x}"
        )
    return fields


def load_idx(images_path, labels_path, num_classes: Optional[int] = None) -> tuple[Tensor, np.ndarray]:
    """Load a big-endian IDX image/label file pair.

    Images come back as a [N, 1, rows, cols] tensor scaled to [0, 1]. When
    ``num_classes`` is given, any label outside [0, num_classes) is rejected.
    """
    img_blob = Path(images_path).read_bytes()
    _, count, rows, cols = _read_header(img_blob, 4, images_path, IDX_IMAGES_MAGIC)
    if count < 1:
        raise FormatError(f"{images_path}: image count is 0")
    expected = 16 + count * rows * cols
    if len(img_blob) < expected:
        raise FormatError(
            f"{images_path}: truncated pixel data, needed {expected} bytes, "
            f"file ends at {len(img_blob)}"
        )
    if len(img_blob) > expected:
        raise FormatError(f"{images_path}: {len(img_blob) - expected} trailing bytes at offset {expected}")
    images = np.frombuffer(img_blob, dtype=np.uint8, offset=16)
    images = images.reshape(count, 1, rows, cols).astype(np.float32) / 255.0

    lbl_blob = Path(labels_path).read_bytes()
    _, lbl_count = _read_header(lbl_blob, 2, labels_path, IDX_LABELS_MAGIC)
    expected = 8 + lbl_count
    if len(lbl_blob) < expected:
        raise FormatError(
            f"{labels_path}: truncated label data, needed {expected} bytes, "
            f"file ends at {len(lbl_blob)}"
        )
    if len(lbl_blob) > expected:
        raise FormatError(f"{labels_path}: {len(lbl_blob) - expected} trailing bytes at offset {expected}")
    if lbl_count != count:
        raise FormatError(
            f"count mismatch: {images_path} has {count} images, "
            f"{labels_path} has {lbl_count} labels"
        )
    labels = np.frombuffer(lbl_blob, dtype=np.uint8, offset=8).astype(np.int64)
    if num_classes is not None and labels.max() >= num_classes:
        raise ValueError(
            f"{labels_path}: label {int(labels.max())} out of range for {num_classes} classes"
        )
    return Tensor(images), labels


def synth_blobs(desc: DatasetDescriptor) -> tuple[Tensor, np.ndarray]:
    """Seeded Gaussian clusters with the minimum inter-center distance fixed at 1.

    Class centers are standard-normal draws rescaled so the closest pair sits
    exactly one unit apart, making ``noise`` directly comparable to the class
    gap. Labels go round-robin, so class counts differ by at most one.
    """
    if desc.kind != "blobs":
        raise ConfigError(f"synth_blobs needs a blobs descriptor, got kind {desc.kind!r}")
    rng = np.random.default_rng(mix_seed(desc.seed, DATA_STREAM))
    centers = rng.standard_normal((desc.classes, desc.dims))
    diffs = centers[:, None, :] - centers[None, :, :]
    dist = np.sqrt((diffs ** 2).sum(axis=2))
    min_dist = dist[~np.eye(desc.classes, dtype=bool)].min()
    if min_dist == 0.0:
        raise ValueError("degenerate blob centers: two classes coincide")
    centers /= min_dist

    labels = np.arange(desc.samples, dtype=np.int64) % desc.classes
    points = centers[labels] + desc.noise * rng.standard_normal((desc.samples, desc.dims))
    return Tensor(points.astype(np.float32)), labels


def load_dataset(desc: DatasetDescriptor,
                 expected_classes: Optional[int] = None) -> SplitDataset:
    if desc.kind == "idx":
        x, y = load_idx(desc.images_path, desc.labels_path, expected_classes)
        num_classes = expected_classes if expected_classes else int(y.max()) + 1
    else:
        if expected_classes is not None and expected_classes != desc.classes:
            raise ConfigError(
                f"model expects {expected_classes} classes, blobs descriptor has {desc.classes}"
            )
        x, y = synth_blobs(desc)
        num_classes = desc.classes

    data = x.data
    n_train = int(desc.split * len(data))
    if n_train < 1 or n_train >= len(data):
        raise ConfigError(
            f"split {desc.split} leaves an empty train or val side for {len(data)} samples"
        )
    return SplitDataset(
        train_x=data[:n_train],
        train_y=y[:n_train],
        val_x=data[n_train:],
        val_y=y[n_train:],
        num_classes=num_classes,
        input_shape=tuple(data.shape[1:]),
    )
