"""Projected cosine similarity and intra-modal retrieval evaluation.

Similarities are accumulated in the dtype of the features they come from
(float32 inputs stay float32, matching extractor precision); every mean /
average-precision reduction is done in float64, with exactly-rounded
summation (math.fsum) for the AP terms so results are independent of
vectorization and reduction order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .align import align_projectors, inter_modal_operator, select_band
from .errors import (
    DegenerateEmbeddingError,
    EmptyPairClassError,
    InfeasibleGridError,
    NoPositivesError,
)
from .tensorio import EmbeddingDataset, ProjectorPair

DEGENERATE_NORM = 1e-12
PAIR_SAMPLE_CAP = 10_000_000


@dataclass(frozen=True)
class RetrievalReport:
    """mAP plus optional precision@K. per_query_ap covers only the queries
    that had at least one positive, in query order."""

    map: float
    per_query_ap: np.ndarray
    precision_at_k: dict
    num_queries_scored: int

    def to_dict(self) -> dict:
        return {
            "map": self.map,
            "num_queries_scored": self.num_queries_scored,
            "precision_at_k": {str(k): v for k, v in self.precision_at_k.items()},
            "per_query_ap": [float(a) for a in self.per_query_ap],
        }


@dataclass(frozen=True)
class OverlapReport:
    """Mass-normalized positive/negative similarity histograms and their
    intersection-over-union."""

    pos_hist: np.ndarray
    neg_hist: np.ndarray
    bin_edges: np.ndarray
    iou: float
    pos_mean: float
    neg_mean: float


@dataclass(frozen=True)
class SweepResult:
    best_k_t: int
    best_k_b: int
    k_t_grid: np.ndarray
    k_b_grid: np.ndarray
    map_grid: np.ndarray  # NaN where k_t + k_b >= r

    @property
    def best_map(self) -> float:
        i = int(np.where(self.k_t_grid == self.best_k_t)[0][0])
        j = int(np.where(self.k_b_grid == self.best_k_b)[0][0])
        return float(self.map_grid[i, j])


def project_and_normalize(w, features) -> np.ndarray:
    """Project feature rows through a d x d_pre head and L2-normalize.

    Output dtype follows the features (the head is cast to match). A row
    whose projected norm falls below 1e-12 raises DegenerateEmbeddingError
    carrying the first offending row index.
    """
    w = np.asarray(w)
    features = np.asarray(features)
    if features.dtype.kind != "f":
        features = features.astype(np.float64)
    if w.shape[1] != features.shape[1]:
        raise ValueError(
            f"head expects {w.shape[1]}-dim features, got {features.shape[1]}"
        )
    projected = features @ w.T.astype(features.dtype, copy=False)
    norms = np.linalg.norm(projected, axis=1)
    bad = np.flatnonzero(norms < DEGENERATE_NORM)
    if bad.size:
        raise DegenerateEmbeddingError(int(bad[0]), float(norms[bad[0]]))
    return projected / norms[:, None]


def similarity_matrix(q, g) -> np.ndarray:
    """Pairwise dot products of unit rows; entry (a, b) = <q_a, g_b>."""
    q = np.asarray(q)
    g = np.asarray(g)
    s = q @ g.T
    # accumulation drift scales with eps of the working dtype
    tol = 1e-6 if s.dtype.itemsize >= 8 else 1e-4
    if s.size and float(np.abs(s).max()) > 1.0 + tol:
        raise ValueError("similarities exceed [-1, 1] tolerance; rows not unit-norm?")
    return s


def _exclusion_mask(shape, exclude_self, self_pairs):
    if not exclude_self:
        return None
    if self_pairs is None:
        raise ValueError("exclude_self=True requires self_pairs")
    pairs = np.asarray(self_pairs, dtype=np.int64).reshape(-1, 2)
    mask = np.zeros(shape, dtype=bool)
    mask[pairs[:, 0], pairs[:, 1]] = True
    return mask


def _ranked_relevance(s_row, rel_row, excluded_row):
    """Descending-similarity stable order; ties keep gallery index ascending."""
    if excluded_row is not None:
        keep = ~excluded_row
        s_row = s_row[keep]
        rel_row = rel_row[keep]
    order = np.argsort(-s_row, kind="stable")
    return rel_row[order]


def mean_average_precision(s, q_labels, g_labels, exclude_self: bool = False,
                           self_pairs=None) -> RetrievalReport:
    """mAP over queries with >= 1 positive.

    AP of a query is the mean of precision-at-rank over its positive
    ranks, after removing self pairs (when requested) and stable-sorting
    by descending similarity. Raises NoPositivesError if no query can be
    scored.
    """
    s = np.asarray(s)
    q_labels = np.asarray(q_labels)
    g_labels = np.asarray(g_labels)
    if s.shape != (q_labels.size, g_labels.size):
        raise ValueError(f"similarity shape {s.shape} inconsistent with labels")
    excluded = _exclusion_mask(s.shape, exclude_self, self_pairs)
    aps = []
    for row in range(s.shape[0]):
        rel = g_labels == q_labels[row]
        ranked = _ranked_relevance(s[row], rel, None if excluded is None else excluded[row])
        n_pos = int(ranked.sum())
        if n_pos == 0:
            continue
        hits = np.cumsum(ranked)
        ranks = np.arange(1, ranked.size + 1)
        precisions = hits[ranked] / ranks[ranked]
        aps.append(math.fsum(precisions) / n_pos)
    if not aps:
        raise NoPositivesError("no query has a positive gallery item")
    return RetrievalReport(
        map=math.fsum(aps) / len(aps),
        per_query_ap=np.array(aps, dtype=np.float64),
        precision_at_k={},
        num_queries_scored=len(aps),
    )


def precision_at_k(s, q_labels, g_labels, ks, exclude_self: bool = False,
                   self_pairs=None) -> dict:
    """Mean over all queries of (positives among top K) / K, per K."""
    s = np.asarray(s)
    q_labels = np.asarray(q_labels)
    g_labels = np.asarray(g_labels)
    excluded = _exclusion_mask(s.shape, exclude_self, self_pairs)
    ranked_rows = [
        _ranked_relevance(s[row], g_labels == q_labels[row],
                          None if excluded is None else excluded[row])
        for row in range(s.shape[0])
    ]
    available = min((r.size for r in ranked_rows), default=0)
    out = {}
    for k in ks:
        k = int(k)
        if k < 1 or k > available:
            raise ValueError(f"K={k} outside [1, {available}] after exclusions")
        vals = [float(np.count_nonzero(r[:k])) / k for r in ranked_rows]
        out[k] = math.fsum(vals) / len(vals) if vals else 0.0
    return out


def overlap_report(s, q_labels, g_labels, bins: int = 100, exclude_self: bool = False,
                   self_pairs=None) -> OverlapReport:
    """Histogram overlap of same-label vs different-label similarities.

    100 uniform bins on [-1, 1] by default, masses summing to one per
    class; above PAIR_SAMPLE_CAP pairs each class is subsampled with a
    fixed seed so the report stays deterministic.
    """
    s = np.asarray(s)
    q_labels = np.asarray(q_labels)
    g_labels = np.asarray(g_labels)
    same = q_labels[:, None] == g_labels[None, :]
    excluded = _exclusion_mask(s.shape, exclude_self, self_pairs)
    if excluded is not None:
        keep = ~excluded
        pos_vals = s[same & keep]
        neg_vals = s[~same & keep]
    else:
        pos_vals = s[same]
        neg_vals = s[~same]
    if pos_vals.size == 0 or neg_vals.size == 0:
        raise EmptyPairClassError(
            f"need both pair classes, got {pos_vals.size} positive / {neg_vals.size} negative"
        )

    def _cap(values):
        if values.size > PAIR_SAMPLE_CAP:
            rng = np.random.default_rng(0)
            values = values[rng.choice(values.size, PAIR_SAMPLE_CAP, replace=False)]
        return values

    pos_vals = _cap(pos_vals)
    neg_vals = _cap(neg_vals)
    edges = np.linspace(-1.0, 1.0, bins + 1)
    # float roundoff can push |cos| a hair past 1; clip so no mass is lost
    pos_hist, _ = np.histogram(np.clip(pos_vals, -1.0, 1.0), bins=edges)
    neg_hist, _ = np.histogram(np.clip(neg_vals, -1.0, 1.0), bins=edges)
    pos_mass = pos_hist / pos_vals.size
    neg_mass = neg_hist / neg_vals.size
    iou = float(np.minimum(pos_mass, neg_mass).sum() / np.maximum(pos_mass, neg_mass).sum())
    return OverlapReport(
        pos_hist=pos_mass,
        neg_hist=neg_mass,
        bin_edges=edges,
        iou=iou,
        pos_mean=float(np.mean(pos_vals, dtype=np.float64)),
        neg_mean=float(np.mean(neg_vals, dtype=np.float64)),
    )


def evaluate_retrieval(w, dataset: EmbeddingDataset, ks=()) -> RetrievalReport:
    """Project a dataset through one head and score retrieval.

    The canonical pipeline: project all rows once, select query/gallery
    views, brute-force similarities, then mAP (and P@K when ks given).
    """
    projected = project_and_normalize(w, dataset.features)
    q = projected[dataset.query_idx]
    g = projected[dataset.gallery_idx]
    s = similarity_matrix(q, g)
    self_pairs = dataset.self_pairs() if dataset.exclude_self else None
    report = mean_average_precision(
        s, dataset.query_labels, dataset.gallery_labels,
        exclude_self=dataset.exclude_self, self_pairs=self_pairs,
    )
    if ks:
        pk = precision_at_k(
            s, dataset.query_labels, dataset.gallery_labels, ks,
            exclude_self=dataset.exclude_self, self_pairs=self_pairs,
        )
        report = RetrievalReport(
            map=report.map,
            per_query_ap=report.per_query_ap,
            precision_at_k=pk,
            num_queries_scored=report.num_queries_scored,
        )
    return report


def sweep_band(pair: ProjectorPair, dataset: EmbeddingDataset, k_t_grid,
               k_b_grid) -> SweepResult:
    """Evaluate mAP over a (k_t, k_b) grid and return the argmax.

    Ties go to the smaller k_t, then smaller k_b. Grid points with
    k_t + k_b >= r are recorded as NaN; if every point is infeasible an
    InfeasibleGridError is raised. The dataset is projected through the
    image-side head; pass pair.swapped() with a text dataset for the
    text-side sweep.
    """
    k_t_grid = np.asarray(sorted(int(k) for k in k_t_grid))
    k_b_grid = np.asarray(sorted(int(k) for k in k_b_grid))
    if k_t_grid.size == 0 or k_b_grid.size == 0:
        raise ValueError("grids must be non-empty")
    op = inter_modal_operator(pair)
    grid = np.full((k_t_grid.size, k_b_grid.size), np.nan)
    best = None
    for i, k_t in enumerate(k_t_grid):
        for j, k_b in enumerate(k_b_grid):
            if k_t + k_b >= op.r:
                continue
            band = select_band(op, k_t, k_b)
            aligned = align_projectors(pair, band, op=op)
            report = evaluate_retrieval(aligned.w_i_hat, dataset)
            grid[i, j] = report.map
            if best is None or report.map > best[0]:
                best = (report.map, int(k_t), int(k_b))
    if best is None:
        raise InfeasibleGridError(f"every grid point has k_t + k_b >= r = {op.r}")
    return SweepResult(
        best_k_t=best[1], best_k_b=best[2],
        k_t_grid=k_t_grid, k_b_grid=k_b_grid, map_grid=grid,
    )
