"""Bit-exact binary tensor files and JSON dataset manifests.

File layout (all little-endian):

    bytes 0..3    magic  b"ISO1"
    byte  4       version, currently 1
    byte  5       dtype code: 0 = float32, 1 = float64, 2 = int64
    bytes 6..9    ndim as uint32 (1 or 2)
    then          ndim x uint64 dims
    then          row-major densely packed payload

A manifest is a JSON object naming a feature tensor, a label tensor and
optional query/gallery index tensors; paths are resolved relative to the
manifest file.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ManifestError,
    NarrowingError,
    TensorFormatError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)

MAGIC = b"ISO1"
VERSION = 1

DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
_KIND_TO_CODE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1, np.dtype(np.int64): 2}


def dtype_code_for(dtype) -> int:
    """Map a numpy dtype to its on-disk code."""
    try:
        return _KIND_TO_CODE[np.dtype(dtype)]
    except KeyError:
        raise UnsupportedDtypeError(f"no on-disk code for dtype {dtype}") from None


def _check_narrowing(data: np.ndarray, target: np.dtype) -> np.ndarray:
    """Cast, rejecting conversions that destroy non-representable values.

    Rounding of in-range floats is fine (f64 -> f32 storage is the normal
    embedding path); what is rejected is overflow to inf, non-integral
    float -> int, and integers too large for the float mantissa.
    """
    if data.dtype == target:
        return data
    with np.errstate(over="ignore"):  # overflow is detected and reported below
        cast = data.astype(target)
    if data.dtype.kind == "f" and target.kind == "f":
        bad = np.isfinite(data) & ~np.isfinite(cast)
        if bad.any():
            raise NarrowingError(f"{bad.sum()} finite values overflow {target}")
    elif data.dtype.kind == "f" and target.kind == "i":
        if not np.isfinite(data).all():
            raise NarrowingError("non-finite values cannot be stored as int64")
        if not (data == np.trunc(data)).all() or (np.abs(data) >= 2.0**63).any():
            raise NarrowingError("non-integral or out-of-range values for int64")
    elif data.dtype.kind in "iu" and target.kind == "f":
        if (cast.astype(data.dtype) != data).any():
            raise NarrowingError(f"integers not exactly representable in {target}")
    return cast


def write_tensor(path, data, dtype: int | None = None) -> None:
    """Write a 1-D or 2-D array in the binary tensor format.

    ``dtype`` is the on-disk code (0/1/2); default is the code matching
    the array's own dtype.
    """
    arr = np.asarray(data)
    if arr.ndim not in (1, 2):
        raise TensorFormatError(f"only 1-D/2-D tensors supported, got ndim={arr.ndim}")
    if dtype is None:
        dtype = dtype_code_for(arr.dtype)
    if dtype not in DTYPE_CODES:
        raise UnsupportedDtypeError(f"unknown dtype code {dtype}")
    target = DTYPE_CODES[dtype]
    arr = _check_narrowing(np.ascontiguousarray(arr), target)
    header = MAGIC + struct.pack("<BBI", VERSION, dtype, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.astype(target, copy=False).tobytes(order="C"))


def read_tensor(path) -> np.ndarray:
    """Read a tensor file back into a numpy array (dtype as stored)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: magic {raw[:4]!r} != {MAGIC!r}")
    if len(raw) < 10:
        raise TruncatedPayloadError(f"{path}: header incomplete")
    version, dtype_code, ndim = struct.unpack_from("<BBI", raw, 4)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: version {version}")
    if dtype_code not in DTYPE_CODES:
        raise UnsupportedDtypeError(f"{path}: dtype code {dtype_code}")
    if ndim not in (1, 2):
        raise TensorFormatError(f"{path}: ndim {ndim} outside {{1, 2}}")
    offset = 10 + 8 * ndim
    if len(raw) < offset:
        raise TruncatedPayloadError(f"{path}: dims incomplete")
    dims = struct.unpack_from(f"<{ndim}Q", raw, 10)
    dtype = DTYPE_CODES[dtype_code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    payload = raw[offset:]
    if len(payload) < expected:
        raise TruncatedPayloadError(f"{path}: payload {len(payload)} < {expected} bytes")
    if len(payload) > expected:
        raise TensorFormatError(f"{path}: {len(payload) - expected} trailing bytes")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


@dataclass(frozen=True)
class ProjectorPair:
    """The two projection heads mapping pre-projection features into the
    shared d-dimensional space: w_i is d x d_i, w_t is d x d_t."""

    w_i: np.ndarray
    w_t: np.ndarray

    def __post_init__(self):
        if self.w_i.ndim != 2 or self.w_t.ndim != 2:
            raise ValueError("projectors must be 2-D")
        if self.w_i.shape[0] != self.w_t.shape[0]:
            raise ValueError(
                f"shared-space dims differ: {self.w_i.shape[0]} vs {self.w_t.shape[0]}"
            )

    @property
    def d(self) -> int:
        return self.w_i.shape[0]

    @property
    def d_i(self) -> int:
        return self.w_i.shape[1]

    @property
    def d_t(self) -> int:
        return self.w_t.shape[1]

    def swapped(self) -> "ProjectorPair":
        """Role swap (image <-> text); used for text-side pipelines."""
        return ProjectorPair(w_i=self.w_t, w_t=self.w_i)


@dataclass(frozen=True)
class EmbeddingDataset:
    """Pre-projection feature rows plus labels and a query/gallery split.

    ``query_idx``/``gallery_idx`` index rows of ``features``; a query and a
    gallery entry are the *same item* (a self pair) when they hold the same
    row index, regardless of feature values.
    """

    features: np.ndarray
    labels: np.ndarray
    query_idx: np.ndarray
    gallery_idx: np.ndarray
    exclude_self: bool = False
    name: str = ""

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def query_features(self) -> np.ndarray:
        return self.features[self.query_idx]

    @property
    def gallery_features(self) -> np.ndarray:
        return self.features[self.gallery_idx]

    @property
    def query_labels(self) -> np.ndarray:
        return self.labels[self.query_idx]

    @property
    def gallery_labels(self) -> np.ndarray:
        return self.labels[self.gallery_idx]

    def self_pairs(self) -> np.ndarray:
        """(query_row, gallery_row) positions that refer to the same item."""
        positions: dict[int, list[int]] = {}
        for col, base_row in enumerate(self.gallery_idx):
            positions.setdefault(int(base_row), []).append(col)
        pairs = [
            (row, col)
            for row, base_row in enumerate(self.query_idx)
            for col in positions.get(int(base_row), ())
        ]
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def load_dataset(manifest_path) -> EmbeddingDataset:
    """Load features/labels/splits described by a manifest JSON file.

    When both index paths are absent every row serves as query and gallery
    and self matches are excluded (unless the manifest opts out with an
    explicit ``exclude_self`` value).
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{manifest_path}: {exc}") from exc
    base = manifest_path.parent

    def _resolve(key):
        value = manifest.get(key)
        return None if value is None else base / value

    features_path = _resolve("features_path")
    labels_path = _resolve("labels_path")
    if features_path is None or labels_path is None:
        raise ManifestError(f"{manifest_path}: features_path and labels_path required")
    features = read_tensor(features_path)
    labels = read_tensor(labels_path)
    if features.ndim != 2:
        raise ManifestError(f"{features_path}: features must be 2-D")
    if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
        raise ManifestError(
            f"labels length {labels.shape[0] if labels.ndim == 1 else labels.shape} "
            f"!= feature rows {features.shape[0]}"
        )
    n = features.shape[0]

    def _load_indices(key):
        path = _resolve(key)
        if path is None:
            return None
        idx = read_tensor(path)
        if idx.ndim != 1 or idx.dtype.kind != "i":
            raise ManifestError(f"{path}: index arrays must be 1-D integer tensors")
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ManifestError(f"{path}: indices outside [0, {n})")
        return idx.astype(np.int64)

    query_idx = _load_indices("query_indices_path")
    gallery_idx = _load_indices("gallery_indices_path")
    no_split = query_idx is None and gallery_idx is None
    if query_idx is None:
        query_idx = np.arange(n, dtype=np.int64)
    if gallery_idx is None:
        gallery_idx = np.arange(n, dtype=np.int64)
    if "exclude_self" in manifest:
        exclude_self = bool(manifest["exclude_self"])
    else:
        exclude_self = no_split
    return EmbeddingDataset(
        features=features,
        labels=labels,
        query_idx=query_idx,
        gallery_idx=gallery_idx,
        exclude_self=exclude_self,
        name=str(manifest.get("name", "")),
    )


def write_dataset(out_dir, name: str, features, labels, query_idx=None,
                  gallery_idx=None, exclude_self=None, feature_dtype: int | None = None):
    """Write a dataset as tensor files + manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "name": name,
        "features_path": f"{name}_features.iso",
        "labels_path": f"{name}_labels.iso",
    }
    write_tensor(out_dir / manifest["features_path"], features, feature_dtype)
    write_tensor(out_dir / manifest["labels_path"], np.asarray(labels, dtype=np.int64))
    if query_idx is not None:
        manifest["query_indices_path"] = f"{name}_query_idx.iso"
        write_tensor(out_dir / manifest["query_indices_path"],
                     np.asarray(query_idx, dtype=np.int64))
    if gallery_idx is not None:
        manifest["gallery_indices_path"] = f"{name}_gallery_idx.iso"
        write_tensor(out_dir / manifest["gallery_indices_path"],
                     np.asarray(gallery_idx, dtype=np.int64))
    if exclude_self is not None:
        manifest["exclude_self"] = bool(exclude_self)
    path = out_dir / f"{name}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
