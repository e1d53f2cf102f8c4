"""Datasets in and experiment results out.

IDX layout (MNIST / EMNIST), all integers big-endian:

    u32 magic      0x00000803 for (n, rows, cols) uint8 images
                   0x00000801 for (n,) uint8 labels
    u32 dim sizes  one per dimension
    u8  payload    row-major

Labels are kept 0-based (MNIST digits already are). EMNIST's ``letters``
split starts at 1; pass ``label_offset=1`` to shift it down.
"""

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .rng import make_rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

CURVE_FIELDS = ("strategy", "seed", "iteration", "labeled_count", "test_accuracy", "wall_time_s")


class IdxFormatError(ValueError):
    """Base class for malformed IDX files."""


class IdxMagicError(IdxFormatError):
    pass


class IdxTruncatedError(IdxFormatError):
    pass


class IdxCountMismatchError(IdxFormatError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    C: int
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("dataset must be a non-empty (n, dim) feature matrix")
        if y.shape != (X.shape[0],):
            raise ValueError(f"{X.shape[0]} feature rows but labels of shape {y.shape}")
        if y.min() < 0 or y.max() >= self.C:
            raise ValueError(f"labels must lie in [0, {self.C})")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.labels.size

    @property
    def dim(self):
        return self.features.shape[1]

    def subset(self, indices, name=None):
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.C, name or self.name)


def _read_idx(path, expected_magic):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4:
        raise IdxTruncatedError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise IdxMagicError(
            f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IdxTruncatedError(f"{path}: header declares {ndim} dims but file ends early")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    need = int(np.prod(dims, dtype=np.int64))
    if len(data) - header < need:
        raise IdxTruncatedError(
            f"{path}: payload has {len(data) - header} bytes, header requires {need}"
        )
    return np.frombuffer(data, dtype=np.uint8, count=need, offset=header).reshape(dims)


def read_idx_images(path):
    return _read_idx(path, IDX_IMAGES_MAGIC)


def read_idx_labels(path):
    return _read_idx(path, IDX_LABELS_MAGIC)


def read_idx(images_path, labels_path, name="idx", transpose=False, label_offset=0, C=None):
    """Parse an IDX image/label pair into a dataset with pixels scaled to [0, 1]."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images_path} has {images.shape[0]} images but {labels_path} has "
            f"{labels.shape[0]} labels"
        )
    if transpose:
        images = images.transpose(0, 2, 1)
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    y = labels.astype(np.int64) - int(label_offset)
    return LabeledDataset(X, y, int(C if C is not None else y.max() + 1), name)


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images (n, rows, cols) and labels (n,) as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">I", IDX_IMAGES_MAGIC))
        fh.write(struct.pack(f">{images.ndim}I", *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def synth_blobs(C, n_per_class, dim=2, spread=0.5, seed=0, separation=3.0, name="blobs"):
    """Isotropic Gaussian clusters, one per class, shuffled with ``seed``.

    Centres sit at ``separation`` times the first C unit vectors when
    ``dim >= C``, otherwise on a circle of that radius in the first two
    coordinates.
    """
    if C < 2 or n_per_class < 1:
        raise ValueError("need C >= 2 and n_per_class >= 1")
    if dim < 2:
        raise ValueError("dim must be >= 2")
    centres = np.zeros((C, dim))
    if dim >= C:
        centres[np.arange(C), np.arange(C)] = separation
    else:
        angles = 2.0 * np.pi * np.arange(C) / C
        centres[:, 0] = separation * np.cos(angles)
        centres[:, 1] = separation * np.sin(angles)
    rng = make_rng(seed, "blobs")
    y = np.repeat(np.arange(C), n_per_class)
    X = centres[y] + spread * rng.standard_normal((y.size, dim))
    order = rng.permutation(y.size)
    return LabeledDataset(X[order], y[order], C, name)


def subsample(dataset, n, seed):
    """A seeded random subset of at most ``n`` items (order follows the draw)."""
    if n >= len(dataset):
        return dataset
    rng = make_rng(seed, "subsample", dataset.name)
    return dataset.subset(rng.choice(len(dataset), size=n, replace=False))


@dataclass(frozen=True)
class LearningCurveRecord:
    strategy: str
    seed: int
    iteration: int
    labeled_count: int
    test_accuracy: float
    wall_time_s: float


def _fmt(x):
    return format(float(x), ".12g")


def write_curves(records, path):
    """One CSV row per record, sorted by (strategy, seed, iteration)."""
    records = list(records)
    if not records:
        raise ValueError("no learning-curve records to write")
    rows = sorted(records, key=lambda r: (r.strategy, r.seed, r.iteration))
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CURVE_FIELDS)
            for r in rows:
                w.writerow([
                    r.strategy, r.seed, r.iteration, r.labeled_count,
                    _fmt(r.test_accuracy), _fmt(r.wall_time_s),
                ])
    except OSError as exc:
        raise OSError(f"cannot write learning curves to {path}: {exc}") from exc


def read_curves(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CURVE_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            LearningCurveRecord(
                strategy=row["strategy"],
                seed=int(row["seed"]),
                iteration=int(row["iteration"]),
                labeled_count=int(row["labeled_count"]),
                test_accuracy=float(row["test_accuracy"]),
                wall_time_s=float(row["wall_time_s"]),
            )
            for row in reader
        ]


def write_scores(dumps, path):
    """Score dumps as CSV: strategy, seed, iteration, index, score, fallback."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("strategy", "seed", "iteration", "index", "score", "fallback"))
        for d in dumps:
            for idx, score, fb in zip(d["indices"], d["scores"], d["fallback"]):
                w.writerow((d["strategy"], d["seed"], d["iteration"], int(idx), _fmt(score), int(fb)))


def read_samples_csv(path, tol=1e-6):
    """An (M, C) matrix of probability rows; each row must sum to 1 within ``tol``.

    A header line is allowed if it is not numeric.
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise ValueError(f"{path}:{lineno}: non-numeric value in {row}") from None
    if not rows:
        raise ValueError(f"{path}: no sample rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: rows have differing column counts {sorted(widths)}")
    s = np.array(rows, dtype=np.float64)
    if s.shape[1] < 2:
        raise ValueError(f"{path}: need at least 2 probability columns")
    if not np.all(np.isfinite(s)) or np.any(s < 0.0):
        raise ValueError(f"{path}: probabilities must be finite and non-negative")
    bad = np.flatnonzero(np.abs(s.sum(axis=1) - 1.0) > tol)
    if bad.size:
        raise ValueError(
            f"{path}: row {bad[0] + 1} sums to {s[bad[0]].sum():.6g}, not 1"
        )
    return s / s.sum(axis=1, keepdims=True)


def write_samples_csv(samples, path):
    s = np.asarray(samples, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"p{k}" for k in range(s.shape[1])])
        for row in s:
            w.writerow([repr(float(v)) for v in row])
