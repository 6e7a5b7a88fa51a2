"""Dataset containers, loaders and the imbalance protocol.

The split protocol mirrors the usual recipe for studying class
imbalance on naturally balanced corpora: split source data into train
and test with stratification, then discard a per-class fraction of the
training samples only. The test distribution is never touched, so
per-class metrics stay comparable across imbalance levels. A small
stratified validation set is carved out of the retained training data
afterwards.
"""

from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError, NumericError, ParseError, ProtocolError, ShapeError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    """Feature matrix with integer labels in [0, n_classes).

    ``meta`` carries provenance (source row indices, label mappings,
    resampling parents) without affecting equality of the data itself.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ShapeError(
                f"features {x.shape} and labels {y.shape} do not align"
            )
        if not np.all(np.isfinite(x)):
            raise NumericError("features contain non-finite values")
        if self.n_classes < 1:
            raise ShapeError("n_classes must be positive")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise ShapeError(
                f"labels must lie in [0, {self.n_classes}), got "
                f"[{y.min()}, {y.max()}]"
            )
        self.features = x
        self.labels = y

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]

    @property
    def class_histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def take(ds: LabeledDataset, indices) -> LabeledDataset:
    """Subset by row indices; records source indices in ``meta``."""
    idx = np.asarray(indices, dtype=np.int64)
    base = ds.meta.get("source_indices")
    source = base[idx] if base is not None else idx.copy()
    return LabeledDataset(
        ds.features[idx], ds.labels[idx], ds.n_classes,
        meta={"source_indices": source},
    )


def generate_gaussian_task(n_classes: int, dim: int, samples_per_class, seed,
                           radius: float = 3.0) -> LabeledDataset:
    """Isotropic unit-variance Gaussian blobs with means on a circle.

    Class c's mean sits at angle 2*pi*c/n_classes on a circle of radius
    ``radius`` in the first two feature dimensions; remaining dimensions
    are zero-mean noise. ``samples_per_class`` is an int or a length-
    n_classes sequence.
    """
    if n_classes < 1 or dim < 2:
        raise ConfigError("need n_classes >= 1 and dim >= 2")
    if np.isscalar(samples_per_class):
        counts = [int(samples_per_class)] * n_classes
    else:
        counts = [int(c) for c in samples_per_class]
    if len(counts) != n_classes or any(c < 1 for c in counts):
        raise ConfigError("samples_per_class must give a positive count per class")
    rng = np.random.default_rng(seed)
    blocks, labels = [], []
    for c, count in enumerate(counts):
        angle = 2.0 * np.pi * c / n_classes
        mean = np.zeros(dim)
        mean[0] = radius * np.cos(angle)
        mean[1] = radius * np.sin(angle)
        blocks.append(rng.normal(loc=mean, scale=1.0, size=(count, dim)))
        labels.append(np.full(count, c, dtype=np.int64))
    return LabeledDataset(np.vstack(blocks), np.concatenate(labels), n_classes)


# ---------------------------------------------------------------------------
# IDX files (the MNIST container format).


def _read_idx_bytes(path) -> bytes:
    p = Path(path)
    if p.suffix == ".gz":
        with gzip.open(p, "rb") as fh:
            return fh.read()
    return p.read_bytes()


def _be32(buf: bytes, offset: int, path) -> int:
    if offset + 4 > len(buf):
        raise ParseError(f"{path}: truncated at byte {len(buf)}, "
                         f"needed 4 bytes at offset {offset}")
    return struct.unpack_from(">I", buf, offset)[0]


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Load an IDX image/label pair; pixels scale to [0, 1], images flatten."""
    img = _read_idx_bytes(images_path)
    magic = _be32(img, 0, images_path)
    if magic != IDX_IMAGES_MAGIC:
        raise ParseError(
            f"{images_path}: bad magic 0x{magic:08x} at offset 0, "
            f"expected 0x{IDX_IMAGES_MAGIC:08x}"
        )
    n_images = _be32(img, 4, images_path)
    rows = _be32(img, 8, images_path)
    cols = _be32(img, 12, images_path)
    expected = 16 + n_images * rows * cols
    if len(img) < expected:
        raise ParseError(
            f"{images_path}: truncated at byte {len(img)}, expected {expected}"
        )
    pixels = np.frombuffer(img, dtype=np.uint8, count=n_images * rows * cols,
                           offset=16)
    features = pixels.reshape(n_images, rows * cols).astype(np.float64) / 255.0

    lab = _read_idx_bytes(labels_path)
    magic = _be32(lab, 0, labels_path)
    if magic != IDX_LABELS_MAGIC:
        raise ParseError(
            f"{labels_path}: bad magic 0x{magic:08x} at offset 0, "
            f"expected 0x{IDX_LABELS_MAGIC:08x}"
        )
    n_labels = _be32(lab, 4, labels_path)
    if len(lab) < 8 + n_labels:
        raise ParseError(f"{labels_path}: truncated at byte {len(lab)}")
    if n_labels != n_images:
        raise ParseError(
            f"count mismatch: {n_images} images vs {n_labels} labels"
        )
    labels = np.frombuffer(lab, dtype=np.uint8, count=n_labels, offset=8)
    labels = labels.astype(np.int64)
    n_classes = int(labels.max()) + 1 if labels.size else 1
    return LabeledDataset(features, labels, n_classes)


def load_csv(path, label_column: str) -> LabeledDataset:
    """Numeric CSV with a header row; labels re-indexed densely.

    Label values map to 0..K-1 in order of first appearance; the mapping
    is recorded under ``meta["label_mapping"]``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if label_column not in header:
            raise ConfigError(
                f"{path}: no column named {label_column!r} in header {header}"
            )
        label_idx = header.index(label_column)
        feature_idx = [i for i in range(len(header)) if i != label_idx]

        rows, raw_labels = [], []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{row_no}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(row[i]) for i in feature_idx])
            except ValueError:
                bad = next(i for i in feature_idx if not _is_float(row[i]))
                raise ParseError(
                    f"{path}:{row_no}: non-numeric value {row[bad]!r} in "
                    f"column {header[bad]!r}"
                ) from None
            raw_labels.append(row[label_idx])

    if not rows:
        raise ParseError(f"{path}: no data rows")
    mapping: dict[str, int] = {}
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for i, value in enumerate(raw_labels):
        if value not in mapping:
            mapping[value] = len(mapping)
        labels[i] = mapping[value]
    return LabeledDataset(
        np.asarray(rows, dtype=np.float64), labels, len(mapping),
        meta={"label_mapping": mapping},
    )


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------------------
# Imbalance protocol.


@dataclass(frozen=True)
class SplitSpec:
    """Stratified split plus per-class retention.

    ``retention`` maps class index to the kept fraction of its training
    samples (default 1.0). Retention applies to training data only;
    ``val_fraction`` of what remains is then carved out per class.
    """

    train_fraction: float
    val_fraction: float = 0.05
    retention: Mapping[int, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie in [0, 1)")
        for cls, frac in self.retention.items():
            if not 0.0 < frac <= 1.0:
                raise ConfigError(
                    f"retention for class {cls} must lie in (0, 1], got {frac}"
                )


def apply_imbalance_protocol(ds: LabeledDataset, spec: SplitSpec):
    """Split into (train, val, test) with induced training imbalance.

    Per class: shuffle, send round(train_fraction * count) samples to
    the training pool and the rest to test; keep
    ceil(retention * pool) of the pool; carve ceil(val_fraction * kept)
    of the kept samples into validation (always leaving at least one
    training sample). Deterministic in ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    train_idx, val_idx, test_idx = [], [], []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        if members.size == 0:
            raise ProtocolError(f"class {c} has no samples")
        perm = members[rng.permutation(members.size)]
        n_pool = int(round(spec.train_fraction * members.size))
        if n_pool == 0:
            raise ProtocolError(
                f"class {c}: train fraction {spec.train_fraction} keeps no samples"
            )
        pool, test = perm[:n_pool], perm[n_pool:]
        retention = spec.retention.get(c, 1.0)
        n_keep = math.ceil(retention * n_pool)
        if n_keep == 0:
            raise ProtocolError(f"class {c} emptied by retention {retention}")
        kept = pool[:n_keep]
        n_val = min(math.ceil(spec.val_fraction * n_keep), n_keep - 1)
        n_val = max(n_val, 0)
        val_idx.append(kept[:n_val])
        train_idx.append(kept[n_val:])
        test_idx.append(test)
    return (
        take(ds, np.concatenate(train_idx)),
        take(ds, np.concatenate(val_idx)),
        take(ds, np.concatenate(test_idx)),
    )
