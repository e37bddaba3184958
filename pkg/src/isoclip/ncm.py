"""Nearest-class-mean classification on projected prototypes.

Prototypes are the per-class means of *pre-projection* features, computed
in float64, then pushed through the (aligned) image head and unit-
normalized. Test samples go to the class whose prototype has the highest
cosine similarity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateEmbeddingError, EmptyClassError
from .retrieval import project_and_normalize
from .tensorio import read_tensor, write_tensor


@dataclass(frozen=True)
class PrototypeSet:
    class_ids: np.ndarray
    prototypes: np.ndarray  # C x d, unit rows
    counts: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.class_ids.size


def compute_prototypes(w, features, labels, class_ids=None) -> PrototypeSet:
    """Mean-then-project prototypes: normalize(W @ mean of class rows).

    ``class_ids`` defaults to the sorted unique labels; passing an explicit
    list raises EmptyClassError for any class without samples.
    """
    features = np.asarray(features)
    labels = np.asarray(labels)
    if class_ids is None:
        class_ids = np.unique(labels)
    else:
        class_ids = np.asarray(class_ids)
    w64 = np.asarray(w, dtype=np.float64)
    prototypes = np.empty((class_ids.size, w64.shape[0]), dtype=np.float64)
    counts = np.empty(class_ids.size, dtype=np.int64)
    for row, cid in enumerate(class_ids):
        members = labels == cid
        counts[row] = int(members.sum())
        if counts[row] == 0:
            raise EmptyClassError(f"class {cid} has no samples")
        mean = features[members].mean(axis=0, dtype=np.float64)
        # literal normalize(W @ mean), one class at a time
        projected = w64 @ mean
        norm = np.linalg.norm(projected)
        if norm < 1e-12:
            raise DegenerateEmbeddingError(row, float(norm))
        prototypes[row] = projected / norm
    return PrototypeSet(class_ids=class_ids, prototypes=prototypes, counts=counts)


def classify(prototypes: PrototypeSet, w, test_features, test_labels=None):
    """Assign each test sample to the most-similar prototype.

    Ties resolve to the lowest class id (prototype rows are in ascending
    class-id order and argmax takes the first maximum). Returns
    (accuracy, predicted labels); accuracy is NaN when test_labels is None.
    """
    order = np.argsort(prototypes.class_ids, kind="stable")
    class_ids = prototypes.class_ids[order]
    protos = prototypes.prototypes[order]
    projected = project_and_normalize(w, np.asarray(test_features))
    sims = projected @ protos.T.astype(projected.dtype, copy=False)
    predicted = class_ids[np.argmax(sims, axis=1)]
    if test_labels is None:
        return float("nan"), predicted
    test_labels = np.asarray(test_labels)
    accuracy = float(np.mean(predicted == test_labels, dtype=np.float64))
    return accuracy, predicted


def save_prototypes(protos: PrototypeSet, out_dir) -> None:
    """Tensor file for the prototype matrix + JSON sidecar of ids/counts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tensor(out_dir / "prototypes.iso", protos.prototypes)
    sidecar = {
        "class_ids": [int(c) for c in protos.class_ids],
        "counts": [int(c) for c in protos.counts],
    }
    (out_dir / "prototypes.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_prototypes(in_dir) -> PrototypeSet:
    in_dir = Path(in_dir)
    prototypes = read_tensor(in_dir / "prototypes.iso")
    sidecar = json.loads((in_dir / "prototypes.json").read_text())
    return PrototypeSet(
        class_ids=np.asarray(sidecar["class_ids"], dtype=np.int64),
        prototypes=prototypes,
        counts=np.asarray(sidecar["counts"], dtype=np.int64),
    )
