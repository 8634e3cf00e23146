"""Dataset ingestion: IDX images, Iris CSV, splits, synthetic fixtures.

IDX files are the canonical big-endian image/label containers (magic
0x00000803 for images, 0x00000801 for labels).  ``.gz`` paths are
decompressed transparently.  Pixels are scaled to [0, 1]; labels become
one-hot rows.  A canonical 150-row Iris CSV ships with the package so the
Iris benchmark runs without any downloads.
"""

import csv
import gzip
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgumentError
from .models import LabeledDataset
from .rng import SplitMix64

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def _read_bytes(path) -> bytes:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        return fh.read()


def _be32(data: bytes, offset: int, path) -> int:
    if len(data) < offset + 4:
        raise FormatError(f"{path}: truncated header at byte {offset}")
    return struct.unpack_from(">I", data, offset)[0]


def _read_idx_images(path) -> np.ndarray:
    data = _read_bytes(path)
    magic = _be32(data, 0, path)
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(f"{path}: bad magic 0x{magic:08x} at byte 0, expected 0x{IDX_IMAGES_MAGIC:08x}")
    n, rows, cols = (_be32(data, 4 * i, path) for i in (1, 2, 3))
    need = 16 + n * rows * cols
    if len(data) < need:
        raise FormatError(f"{path}: pixel data truncated at byte {len(data)}, expected {need} bytes")
    pixels = np.frombuffer(data, dtype=np.uint8, count=n * rows * cols, offset=16)
    return pixels.reshape(n, rows, cols)


def _read_idx_labels(path) -> np.ndarray:
    data = _read_bytes(path)
    magic = _be32(data, 0, path)
    if magic != IDX_LABELS_MAGIC:
        raise FormatError(f"{path}: bad magic 0x{magic:08x} at byte 0, expected 0x{IDX_LABELS_MAGIC:08x}")
    n = _be32(data, 4, path)
    if len(data) < 8 + n:
        raise FormatError(f"{path}: label data truncated at byte {len(data)}, expected {8 + n} bytes")
    return np.frombuffer(data, dtype=np.uint8, count=n, offset=8)


def write_idx_images(path, images: np.ndarray) -> None:
    """Write a uint8 (N, rows, cols) array as an IDX image file."""
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.size))
        fh.write(labels.tobytes())


def one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise FormatError(f"label {int(labels.max())} outside [0, {k})")
    return np.eye(k, dtype=np.uint8)[labels]


def load_mnist_idx(images_path, labels_path, flatten: bool = True, name: str = "mnist") -> LabeledDataset:
    """Parse an IDX image/label pair into a dataset.

    Pixels are scaled to [0, 1].  ``flatten`` yields N x 784 rows for the
    logistic model; otherwise images stay N x rows x cols x 1 for the CNN.
    """
    images = _read_idx_images(images_path)
    labels = _read_idx_labels(labels_path)
    if labels.shape[0] != images.shape[0]:
        raise FormatError(
            f"{labels_path}: {labels.shape[0]} labels for {images.shape[0]} images"
        )
    X = images.astype(np.float64) / 255.0
    X = X.reshape(X.shape[0], -1) if flatten else X[..., None]
    return LabeledDataset(X, one_hot(labels, 10), name=name)


def mnist_paths(root) -> dict | None:
    """Locate the four canonical files under ``root`` (plain or .gz), else None."""
    root = Path(root)
    found = {}
    for key, stem in MNIST_FILES.items():
        for candidate in (root / stem, root / (stem + ".gz")):
            if candidate.exists():
                found[key] = candidate
                break
        else:
            return None
    return found


def load_mnist_dir(root, flatten: bool = True) -> tuple[LabeledDataset, LabeledDataset]:
    paths = mnist_paths(root)
    if paths is None:
        raise FileNotFoundError(
            f"MNIST files not found under {root!r}; run scripts/fetch_mnist.py or set CONNTRA_DATA_DIR"
        )
    train = load_mnist_idx(paths["train_images"], paths["train_labels"], flatten, "mnist/train")
    test = load_mnist_idx(paths["test_images"], paths["test_labels"], flatten, "mnist/test")
    return train, test


# ---------------------------------------------------------------------------
# Iris


def packaged_iris_path():
    """Path of the bundled canonical 150-row Iris CSV."""
    return resources.files("conntra").joinpath("resources", "iris.csv")


def load_iris_csv(path=None) -> LabeledDataset:
    """Load an Iris CSV (4 numeric columns + species name).

    Header rows (first cell not a number) are skipped wherever they appear;
    a row that parses only partially is an error naming the line.  Features
    are min-max normalized per column; species map to one-hot classes in
    alphabetical order.
    """
    if path is None:
        path = packaged_iris_path()
    text = Path(path).read_text() if isinstance(path, (str, Path)) else path.read_text()
    rows, species = [], []
    for line_no, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            float(row[0])
        except ValueError:
            continue  # header (possibly duplicated)
        if len(row) != 5:
            raise FormatError(f"line {line_no}: expected 4 measurements and a species, got {len(row)} fields")
        try:
            rows.append([float(cell) for cell in row[:4]])
        except ValueError:
            raise FormatError(f"line {line_no}: non-numeric measurement") from None
        species.append(row[4].strip())
    if not rows:
        raise FormatError("no data rows found")
    X = np.array(rows)
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    X = (X - lo) / span
    classes = sorted(set(species))
    labels = np.array([classes.index(s) for s in species])
    return LabeledDataset(X, one_hot(labels, len(classes)), name="iris")


# ---------------------------------------------------------------------------
# Splits


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidArgumentError("train_fraction must be strictly between 0 and 1")


def split_indices(label_indices: np.ndarray, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint train/validation index sets covering every sample once."""
    label_indices = np.asarray(label_indices)
    n = label_indices.size
    rng = SplitMix64(spec.seed)
    train_parts, val_parts = [], []
    if spec.stratified:
        for cls in np.unique(label_indices):
            members = np.flatnonzero(label_indices == cls)
            perm = members[rng.permutation(members.size)]
            take = int(round(spec.train_fraction * members.size))
            train_parts.append(perm[:take])
            val_parts.append(perm[take:])
    else:
        perm = rng.permutation(n)
        take = int(round(spec.train_fraction * n))
        train_parts.append(perm[:take])
        val_parts.append(perm[take:])
    train = np.sort(np.concatenate(train_parts)).astype(np.int64)
    val = np.sort(np.concatenate(val_parts)).astype(np.int64)
    return train, val


def split(data: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset]:
    train_idx, val_idx = split_indices(data.label_indices, spec)
    if train_idx.size == 0 or val_idx.size == 0:
        raise InvalidArgumentError("split left one side empty; adjust train_fraction")
    mk = lambda idx, tag: LabeledDataset(
        data.features[idx], data.labels_onehot[idx], name=f"{data.name}/{tag}"
    )
    return mk(train_idx, "train"), mk(val_idx, "val")


def subset(data: LabeledDataset, n: int, seed: int = 0, stratified: bool = True) -> LabeledDataset:
    """Deterministic subset of exactly n samples (stratified by default).

    Per-class quotas use floor(n * n_c / N) with the remainder going to the
    classes with the largest fractional parts, so class proportions are
    preserved within one sample.
    """
    if not 0 < n <= data.n:
        raise InvalidArgumentError(f"subset size {n} outside (0, {data.n}]")
    if n == data.n:
        return data
    rng = SplitMix64(seed)
    labels = data.label_indices
    if not stratified:
        idx = np.sort(rng.permutation(data.n)[:n])
    else:
        classes = np.unique(labels)
        fractions = np.array([n * np.count_nonzero(labels == c) / data.n for c in classes])
        quotas = np.floor(fractions).astype(int)
        order = np.argsort(-(fractions - quotas), kind="stable")
        quotas[order[: n - quotas.sum()]] += 1
        parts = []
        for c, quota in zip(classes, quotas):
            members = np.flatnonzero(labels == c)
            parts.append(members[rng.permutation(members.size)][:quota])
        idx = np.sort(np.concatenate(parts))
    return LabeledDataset(data.features[idx], data.labels_onehot[idx], name=f"{data.name}/subset{n}")


# ---------------------------------------------------------------------------
# Synthetic fixtures


def synthetic_blobs(n: int, d: int, k: int, seed: int, separation: float = 8.0) -> LabeledDataset:
    """k unit-variance Gaussian clusters with pairwise center distance >= separation.

    Centers sit on the coordinate axes at multiples of ``separation``; with
    the default spacing of eight sigmas the classes are linearly separable
    for any reasonable sample count.  Classes are assigned round-robin.
    """
    if k < 2:
        raise InvalidArgumentError("need at least two classes")
    if d < 1 or n < k:
        raise InvalidArgumentError("need d >= 1 and n >= k")
    centers = np.zeros((k, d))
    for i in range(k):
        centers[i, i % d] = separation * (1 + i // d)
    rng = SplitMix64(seed)
    labels = np.arange(n) % k
    X = centers[labels] + rng.normal_array(n * d).reshape(n, d)
    return LabeledDataset(X, one_hot(labels, k), name=f"synthetic(n={n},d={d},k={k})")


def as_images(data: LabeledDataset, rows: int, cols: int) -> LabeledDataset:
    """Reshape flat features to rows x cols x 1 images (for the CNN)."""
    if data.features.shape[1] != rows * cols:
        raise InvalidArgumentError(f"cannot reshape {data.features.shape[1]} features to {rows}x{cols}")
    X = data.features.reshape(data.n, rows, cols, 1)
    return LabeledDataset(X, data.labels_onehot, name=data.name)
