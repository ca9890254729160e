"""Circle data, MNIST IDX ingestion, seeded splits and label-noise injection."""
from __future__ import annotations

import csv
import gzip
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .noise import NoiseModel, flip_labels

CACHE_VERSION = 1

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049

# IDX type byte -> big-endian numpy dtype
IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


class IdxError(ValueError):
    pass


class BadMagicError(IdxError):
    pass


class TruncatedPayloadError(IdxError):
    pass


class DimensionMismatchError(IdxError):
    pass


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    k: int
    clean_labels: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be (n, d) with one label per row")
        if self.labels.size and (self.labels.min() < 1 or self.labels.max() > self.k):
            raise ValueError(f"labels outside 1..{self.k}")
        if self.clean_labels is not None:
            self.clean_labels = np.asarray(self.clean_labels, dtype=np.int64)
            if self.clean_labels.shape != self.labels.shape:
                raise ValueError("clean_labels must align with labels")

    def __len__(self) -> int:
        return self.labels.size

    def subset(self, idx) -> "LabeledDataset":
        clean = None if self.clean_labels is None else self.clean_labels[idx]
        return LabeledDataset(self.features[idx], self.labels[idx], self.k, clean, dict(self.meta))

    def flip_fraction(self) -> float:
        if self.clean_labels is None:
            return 0.0
        return float(np.mean(self.labels != self.clean_labels))


def make_circles(n: int, noise_sigma: float, factor: float, rng: np.random.Generator) -> LabeledDataset:
    """Two concentric circles: outer radius 1 is class 1, inner radius ``factor`` class 2.

    Angles are equally spaced on each circle before an i.i.d. Gaussian
    perturbation of scale ``noise_sigma`` per coordinate.
    """
    if n <= 0 or n % 2:
        raise ValueError("n must be a positive even number")
    if not 0 < factor < 1:
        raise ValueError("factor must lie in (0, 1)")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    half = n // 2
    angles = np.linspace(0.0, 2 * np.pi, half, endpoint=False)
    ring = np.column_stack([np.cos(angles), np.sin(angles)])
    X = np.vstack([ring, factor * ring])
    y = np.concatenate([np.ones(half, dtype=np.int64), np.full(half, 2, dtype=np.int64)])
    if noise_sigma > 0:
        X = X + rng.normal(scale=noise_sigma, size=X.shape)
    meta = {"source": "circles", "n": n, "noise_sigma": noise_sigma, "factor": factor}
    return LabeledDataset(X, y, 2, meta=meta)


def _open(path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def read_idx_raw(path) -> np.ndarray:
    """Parse any IDX file into a native-endian array of its declared shape."""
    with _open(path) as fh:
        data = fh.read()
    if len(data) < 4:
        raise TruncatedPayloadError(f"{path}: file shorter than the IDX magic")
    zero, type_code, ndim = struct.unpack(">HBB", data[:4])
    if zero != 0 or type_code not in IDX_DTYPES or ndim == 0:
        raise BadMagicError(f"{path}: bad magic 0x{int.from_bytes(data[:4], 'big'):08x}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise TruncatedPayloadError(f"{path}: header declares {ndim} dims but file ends early")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    dtype = IDX_DTYPES[type_code]
    expected = int(np.prod(dims)) * dtype.itemsize
    payload = data[header:]
    if len(payload) < expected:
        raise TruncatedPayloadError(f"{path}: payload has {len(payload)} bytes, dims {dims} need {expected}")
    if len(payload) > expected:
        raise DimensionMismatchError(f"{path}: {len(payload) - expected} trailing bytes beyond dims {dims}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return arr.astype(dtype.newbyteorder("="))


def write_idx(path, array: np.ndarray) -> None:
    array = np.asarray(array)
    for code, dt in IDX_DTYPES.items():
        if array.dtype.newbyteorder(">") == dt or array.dtype == dt:
            break
    else:
        raise ValueError(f"dtype {array.dtype} has no IDX type code")
    head = struct.pack(">HBB", 0, code, array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    body = array.astype(dt).tobytes()
    opener = gzip.open if Path(path).suffix == ".gz" else open
    with opener(path, "wb") as fh:
        fh.write(head + body)


def read_idx(path) -> np.ndarray:
    """Read an MNIST IDX file.

    Images (magic 2051) come back as float64 ``(n, 784)`` scaled to [0, 1];
    labels (magic 2049) as int64 classes 1..10.
    """
    with _open(path) as fh:
        head = fh.read(4)
    if len(head) < 4:
        raise TruncatedPayloadError(f"{path}: file shorter than the IDX magic")
    magic = struct.unpack(">I", head)[0]
    if magic not in (IMAGE_MAGIC, LABEL_MAGIC):
        raise BadMagicError(f"{path}: bad magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x} or 0x{LABEL_MAGIC:08x}")
    arr = read_idx_raw(path)
    if magic == IMAGE_MAGIC:
        if arr.ndim != 3 or arr.shape[1:] != (28, 28):
            raise DimensionMismatchError(f"{path}: image dims {arr.shape} are not n x 28 x 28")
        return arr.reshape(arr.shape[0], 784).astype(np.float64) / 255.0
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{path}: label file must be one-dimensional, got {arr.shape}")
    return arr.astype(np.int64) + 1


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (directory / name).exists():
            return directory / name
    raise FileNotFoundError(f"no {stem}[.gz] under {directory}")


def load_mnist(directory, part: str = "train") -> LabeledDataset:
    """Load ``train`` or ``t10k`` images and labels from an MNIST directory."""
    directory = Path(directory)
    images = read_idx(_find(directory, f"{part}-images-idx3-ubyte"))
    labels = read_idx(_find(directory, f"{part}-labels-idx1-ubyte"))
    if images.shape[0] != labels.shape[0]:
        raise DimensionMismatchError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return LabeledDataset(images, labels, 10, meta={"source": f"mnist:{part}"})


def split(dataset: LabeledDataset, sizes, rng: np.random.Generator):
    """Seeded permutation cut into contiguous (train, val, test) slices."""
    sizes = [int(s) for s in sizes]
    if any(s < 0 for s in sizes) or sum(sizes) > len(dataset):
        raise ValueError(f"split sizes {sizes} oversubscribe {len(dataset)} rows")
    perm = rng.permutation(len(dataset))
    out, start = [], 0
    for s in sizes:
        out.append(dataset.subset(perm[start:start + s]))
        start += s
    return tuple(out)


def make_noisy_dataset(dataset: LabeledDataset, noise: NoiseModel, rng: np.random.Generator, seed=None) -> LabeledDataset:
    """Flip the clean labels per ``noise``; tabular models are keyed by row index.

    Features and row order are untouched and the clean labels are kept in
    ``clean_labels``.
    """
    if noise.k != dataset.k:
        raise ValueError(f"noise model K={noise.k} but dataset K={dataset.k}")
    clean = dataset.labels if dataset.clean_labels is None else dataset.clean_labels
    noisy = flip_labels(clean, noise, rng, point_ids=range(len(dataset)))
    meta = dict(dataset.meta, noise=noise.to_dict(), noise_seed=seed)
    return replace(dataset, labels=noisy, clean_labels=clean.copy(), meta=meta)


def to_csv(dataset: LabeledDataset, path) -> None:
    d = dataset.features.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(d)] + ["label", "clean_label"])
        clean = dataset.labels if dataset.clean_labels is None else dataset.clean_labels
        for row, y, c in zip(dataset.features, dataset.labels, clean):
            w.writerow([repr(float(v)) for v in row] + [int(y), int(c)])


def read_csv(path, k: int | None = None) -> LabeledDataset:
    """Inverse of :func:`to_csv`; ``k`` defaults to the largest label seen."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    if header[-2:] != ["label", "clean_label"]:
        raise ValueError(f"{path}: expected trailing label,clean_label columns")
    d = len(header) - 2
    X = np.array([[float(v) for v in row[:d]] for row in rows]).reshape(len(rows), d)
    y = np.array([int(row[d]) for row in rows], dtype=np.int64)
    c = np.array([int(row[d + 1]) for row in rows], dtype=np.int64)
    k = int(k or max(y.max(initial=1), c.max(initial=1), 2))
    return LabeledDataset(X, y, k, None if np.array_equal(y, c) else c, {"source": f"csv:{Path(path).name}"})


def save_cache(dataset: LabeledDataset, path) -> None:
    """Compact ``.npz`` cache with a versioned JSON header."""
    header = {"version": CACHE_VERSION, "k": dataset.k, "meta": dataset.meta}
    arrays = {"features": dataset.features, "labels": dataset.labels}
    if dataset.clean_labels is not None:
        arrays["clean_labels"] = dataset.clean_labels
    with open(path, "wb") as fh:
        np.savez_compressed(fh, header=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8), **arrays)


def load_cache(path) -> LabeledDataset:
    with np.load(path) as z:
        header = json.loads(z["header"].tobytes().decode())
        if header.get("version") != CACHE_VERSION:
            raise ValueError(f"{path}: cache version {header.get('version')} unsupported")
        clean = z["clean_labels"] if "clean_labels" in z.files else None
        return LabeledDataset(z["features"], z["labels"], header["k"], clean, header["meta"])
