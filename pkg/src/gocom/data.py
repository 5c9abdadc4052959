"""Data ingestion: IDX image files and a synthetic blob dataset.

IDX files (optionally gzipped, detected by the 1f 8b prefix) follow the
big-endian header layout: u32 magic, u32 count, then per-axis u32 dims for
images.  Pixels are scaled into [0, 1].  The synthetic generator renders C
Gaussian-blob prototypes on an 8x8 grid with additive pixel noise; it is
the CI-friendly stand-in for a real image set.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    inputs: np.ndarray        # (n, H, W, C) float64 in [0, 1]
    labels: np.ndarray        # (n,) int64
    split: str = "train"

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise DataError(f"count mismatch: {self.inputs.shape[0]} inputs, {self.labels.shape[0]} labels")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_shape(self):
        return self.inputs.shape[1:]

    def subset(self, idx, split=None) -> "Dataset":
        return Dataset(self.inputs[idx], self.labels[idx], split or self.split)


def _read_file(path) -> bytes:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:2] == b"\x1f\x8b":
        blob = gzip.decompress(blob)
    return blob


def _parse_idx_images(blob: bytes, path) -> np.ndarray:
    if len(blob) < 16:
        raise DataError(f"{path}: truncated IDX image header")
    magic, count, rows, cols = struct.unpack(">IIII", blob[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise DataError(f"{path}: bad image magic 0x{magic:08x} (want 0x{IDX_IMAGE_MAGIC:08x})")
    need = 16 + count * rows * cols
    if len(blob) < need:
        raise DataError(f"{path}: truncated image payload ({len(blob)} < {need} bytes)")
    pixels = np.frombuffer(blob, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows, cols)


def _parse_idx_labels(blob: bytes, path) -> np.ndarray:
    if len(blob) < 8:
        raise DataError(f"{path}: truncated IDX label header")
    magic, count = struct.unpack(">II", blob[:8])
    if magic != IDX_LABEL_MAGIC:
        raise DataError(f"{path}: bad label magic 0x{magic:08x} (want 0x{IDX_LABEL_MAGIC:08x})")
    if len(blob) < 8 + count:
        raise DataError(f"{path}: truncated label payload")
    return np.frombuffer(blob, dtype=np.uint8, count=count, offset=8)


def load_idx(images_path, labels_path, split: str = "train") -> Dataset:
    """Load an IDX image/label pair, pixels scaled to [0, 1] by /255."""
    images = _parse_idx_images(_read_file(images_path), images_path)
    labels = _parse_idx_labels(_read_file(labels_path), labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DataError(f"image count {images.shape[0]} != label count {labels.shape[0]}")
    x = images.astype(np.float64)[..., None] / 255.0
    return Dataset(x, labels.astype(np.int64), split)


# -- synthetic blobs ----------------------------------------------------------

SYNTH_SIZE = 8
# well separated candidate centers for the class marker blob (outer ring)
_MARKER_CELLS = [(1.5, 1.5), (1.5, 3.5), (1.5, 5.5), (3.5, 1.5),
                 (3.5, 5.5), (5.5, 1.5), (5.5, 3.5), (5.5, 5.5)]


def synth_prototypes(classes: int, rng: np.random.Generator) -> np.ndarray:
    """One Gaussian-blob prototype per class.

    Every class shares a broad base blob at the canvas center; the class
    identity is a small, low-amplitude marker blob at a class-specific
    position.  The base dominates the pixel energy, so reconstruction
    fidelity and class fidelity deliberately diverge.
    """
    if classes > len(_MARKER_CELLS):
        raise DataError(f"at most {len(_MARKER_CELLS)} synthetic classes, got {classes}")
    cells = rng.permutation(len(_MARKER_CELLS))[:classes]
    yy, xx = np.mgrid[0:SYNTH_SIZE, 0:SYNTH_SIZE]
    mid = (SYNTH_SIZE - 1) / 2.0
    base = 0.8 * np.exp(-((yy - mid) ** 2 + (xx - mid) ** 2) / (2.0 * 2.0 ** 2))
    protos = np.empty((classes, SYNTH_SIZE, SYNTH_SIZE))
    for k, cell in enumerate(cells):
        cy, cx = _MARKER_CELLS[cell]
        cy += rng.uniform(-0.3, 0.3)
        cx += rng.uniform(-0.3, 0.3)
        width = rng.uniform(0.55, 0.7)
        marker = 0.5 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * width ** 2))
        protos[k] = np.clip(base + marker, 0.0, 1.0)
    return protos


def gen_synth(n: int, classes: int = 4, seed: int = 0, noise: float = 0.02,
              split: str = "train") -> Dataset:
    """Class-balanced noisy renderings of per-class blob prototypes."""
    if n < classes:
        raise DataError(f"need n >= classes, got n={n}, classes={classes}")
    rng = np.random.default_rng(seed)
    protos = synth_prototypes(classes, rng)
    labels = np.arange(n, dtype=np.int64) % classes
    labels = labels[rng.permutation(n)]
    x = protos[labels]
    if noise > 0.0:
        x = x + rng.normal(0.0, noise, size=x.shape)
    x = np.clip(x, 0.0, 1.0)
    return Dataset(x[..., None], labels, split)


def gen_synth_pair(n_train: int, n_test: int, classes: int = 4, seed: int = 0,
                   noise: float = 0.02) -> tuple[Dataset, Dataset]:
    """Train/test split drawn from one prototype set (one seed, one draw)."""
    full = gen_synth(n_train + n_test, classes, seed, noise)
    return (full.subset(slice(0, n_train), "train"),
            full.subset(slice(n_train, n_train + n_test), "test"))


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write an IDX pair (uint8 images in [0,255]); used by tests and demos."""
    n, rows, cols = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABEL_MAGIC, n))
        f.write(labels.astype(np.uint8).tobytes())
