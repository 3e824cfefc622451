"""
Dataset file format and in-memory dataset.

Layout (little-endian):

    "MSGD" | version u32 | N u32 | C u32 | H u32 | W u32 | classes u32
    | N*C*H*W float32 pixels (CHW planes, sample-major) | N u32 labels
"""

import struct
from pathlib import Path
from typing import Iterator, Optional, Tuple

import numpy as np

from core.errors import BadMagicError, FormatError, LabelRangeError, TruncatedFileError

DATASET_MAGIC = b"MSGD"
DATASET_VERSION = 1
_HEADER = struct.Struct("<4s6I")


class Dataset:
    """
    Labelled image set held in memory.

    Attributes:
        images: (N, C, H, W) pixels
        labels: (N,) int64 class indices
        num_classes: number of classes declared by the file
    """

    def __init__(self, images: np.ndarray, labels: np.ndarray, num_classes: int):
        self.images = np.asarray(images)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.num_classes = int(num_classes)
        if self.images.ndim != 4:
            raise FormatError(f"images must be (N, C, H, W), got {self.images.shape}")
        if len(self.labels) != len(self.images):
            raise FormatError(f"{len(self.labels)} labels for {len(self.images)} images")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise LabelRangeError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def astype(self, dtype) -> "Dataset":
        return Dataset(self.images.astype(dtype), self.labels, self.num_classes)

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.images[indices], self.labels[indices], self.num_classes)

    def batches(
        self,
        batch_size: int,
        rng: Optional[np.random.Generator] = None,
        augment: bool = False,
    ) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """
        Iterate over (images, labels) mini-batches.

        Args:
            batch_size: samples per batch (the last batch may be smaller)
            rng: shuffles the order (and drives augmentation) when given
            augment: apply random crop + flip (needs rng)
        """
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(self), batch_size):
            idx = order[start:start + batch_size]
            x = self.images[idx]
            if augment and rng is not None:
                x = augment_batch(x, rng)
            yield x, self.labels[idx]

    def __repr__(self):
        return (f"Dataset(samples={len(self)}, shape={self.image_shape}, "
                f"classes={self.num_classes})")


def augment_batch(x: np.ndarray, rng: np.random.Generator, padding: int = 4) -> np.ndarray:
    """Random crop from a zero-padded image plus random horizontal flip."""
    n, _, h, w = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    dy = rng.integers(0, 2 * padding + 1, size=n)
    dx = rng.integers(0, 2 * padding + 1, size=n)
    flip = rng.random(n) < 0.5
    out = np.empty_like(x)
    for i in range(n):
        crop = padded[i, :, dy[i]:dy[i] + h, dx[i]:dx[i] + w]
        out[i] = crop[:, :, ::-1] if flip[i] else crop
    return out


def encode_dataset(dataset: Dataset) -> bytes:
    n, c, h, w = dataset.images.shape
    header = _HEADER.pack(DATASET_MAGIC, DATASET_VERSION, n, c, h, w, dataset.num_classes)
    pixels = np.ascontiguousarray(dataset.images, dtype="<f4").tobytes()
    labels = np.ascontiguousarray(dataset.labels, dtype="<u4").tobytes()
    return header + pixels + labels


def decode_dataset(raw: bytes, dtype=np.float32) -> Dataset:
    """
    Parse and validate dataset bytes.

    Raises:
        BadMagicError, TruncatedFileError, FormatError, LabelRangeError
    """
    if len(raw) >= 4 and raw[:4] != DATASET_MAGIC:
        raise BadMagicError(f"expected magic {DATASET_MAGIC!r}, found {raw[:4]!r}")
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"dataset header needs {_HEADER.size} bytes, file has {len(raw)}")
    _, version, n, c, h, w, classes = _HEADER.unpack_from(raw)
    if version != DATASET_VERSION:
        raise FormatError(f"unsupported dataset version {version}")
    if classes < 1:
        raise FormatError("dataset declares no classes")

    pixel_bytes = 4 * n * c * h * w
    expected = _HEADER.size + pixel_bytes + 4 * n
    if len(raw) < expected:
        raise TruncatedFileError(f"dataset declares {expected} bytes, file has {len(raw)}")
    if len(raw) > expected:
        raise FormatError(f"{len(raw) - expected} trailing bytes after dataset body")

    images = np.frombuffer(raw, dtype="<f4", count=n * c * h * w, offset=_HEADER.size)
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=_HEADER.size + pixel_bytes)
    if n and int(labels.max()) >= classes:
        bad = int(np.argmax(labels >= classes))
        raise LabelRangeError(f"sample {bad} has label {int(labels[bad])} >= {classes} classes")
    return Dataset(images.reshape(n, c, h, w).astype(dtype), labels.astype(np.int64), classes)


def save_dataset(dataset: Dataset, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_dataset(dataset))
    return path


def load_dataset(path: Path, dtype=np.float32, verbose: bool = False) -> Dataset:
    """
    Load a dataset file, validating every invariant before returning.

    Args:
        path: dataset file
        dtype: in-memory pixel dtype (float64 promotes for gradient checks)
        verbose: print a one-line summary
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset not found: {path}")
    dataset = decode_dataset(path.read_bytes(), dtype)
    if verbose:
        print(f"[data] {path.name}: {dataset!r}")
    return dataset
