"""Synthetic Gaussian-cluster datasets and a minimal binary dataset format.

Binary layout (all little-endian)::

    magic      4 bytes   b"ZWDS"
    version    uint32    1
    n_rows     uint32
    n_cols     uint32
    n_classes  uint32
    features   n_rows * n_cols float32, row-major
    labels     n_rows int32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigError
from .nn import Batch
from .rng import SeedStream

MAGIC = b"ZWDS"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")
EVAL_FRACTION = 0.1


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    num_classes: int = 8
    samples_per_class: int = 300
    input_dim: int = 32
    class_separation: float = 2.5
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError("need at least two classes", field="num_classes")
        if self.samples_per_class < 2:
            raise ConfigError("need at least two samples per class", field="samples_per_class")
        if self.input_dim < 1:
            raise ConfigError("input_dim must be positive", field="input_dim")
        if not self.class_separation > 0:
            raise ConfigError("class_separation must be positive", field="class_separation")
        if not self.noise_std > 0:
            raise ConfigError("noise_std must be positive", field="noise_std")


class Dataset(NamedTuple):
    train: Batch
    eval: Batch
    num_classes: int


def _class_means(spec: SyntheticDatasetSpec, stream: SeedStream) -> np.ndarray:
    # means sit on a sphere of radius `separation`; redraw any that land too close
    means = np.empty((spec.num_classes, spec.input_dim))
    for c in range(spec.num_classes):
        for attempt in range(10_000):
            v = stream.spawn("mean", c, attempt).normal(spec.input_dim)
            norm = np.linalg.norm(v)
            if norm == 0.0:
                continue
            v = spec.class_separation * v / norm
            if c == 0 or np.min(np.linalg.norm(means[:c] - v, axis=1)) >= spec.class_separation:
                means[c] = v
                break
        else:
            raise ConfigError("could not place class means at the requested separation; "
                              "increase input_dim or reduce num_classes", field="class_separation")
    return means


def generate_synthetic(spec: SyntheticDatasetSpec) -> Dataset:
    """Isotropic Gaussian clusters, split 90/10 per class into train and eval."""
    root = SeedStream(spec.seed)
    means = _class_means(spec, root)
    n_eval = max(1, int(round(EVAL_FRACTION * spec.samples_per_class)))
    train_x, train_y, eval_x, eval_y = [], [], [], []
    for c in range(spec.num_classes):
        noise = root.spawn("noise", c).normal(spec.samples_per_class * spec.input_dim)
        x = means[c] + spec.noise_std * noise.reshape(spec.samples_per_class, spec.input_dim)
        y = np.full(spec.samples_per_class, c, dtype=np.int64)
        train_x.append(x[n_eval:])
        train_y.append(y[n_eval:])
        eval_x.append(x[:n_eval])
        eval_y.append(y[:n_eval])
    train = Batch(np.concatenate(train_x), np.concatenate(train_y))
    held_out = Batch(np.concatenate(eval_x), np.concatenate(eval_y))
    return Dataset(train, held_out, spec.num_classes)


def write_binary(path, batch: Batch, num_classes: int) -> None:
    x = np.ascontiguousarray(batch.features, dtype="<f4")
    y = np.ascontiguousarray(batch.labels, dtype="<i4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, x.shape[0], x.shape[1], int(num_classes)))
        fh.write(x.tobytes())
        fh.write(y.tobytes())


def read_binary(path) -> tuple[Batch, int]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"{path}: file too short for a dataset header")
    magic, version, rows, cols, classes = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ConfigError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 4 * rows * cols + 4 * rows
    if len(raw) != expected:
        raise ConfigError(f"{path}: expected {expected} bytes, found {len(raw)}")
    offset = _HEADER.size
    x = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=offset).reshape(rows, cols)
    y = np.frombuffer(raw, dtype="<i4", count=rows, offset=offset + 4 * rows * cols)
    if rows and (y.min() < 0 or y.max() >= classes):
        raise ConfigError(f"{path}: labels outside [0, {classes})")
    return Batch(x.astype(np.float64), y.astype(np.int64)), int(classes)
