"""Synthetic projector pairs and datasets with a planted spectral structure.

The generator plants psi = U Sigma V^T exactly by factoring through a
shared orthonormal basis:

    W_i = O Sigma^{1/2} U^T        W_t = O Sigma^{1/2} V^T

so W_i^T W_t = U Sigma V^T with no roundoff beyond the matmuls. Class
signal lives in the middle columns of U (and V for the text side);
modality-specific nuisance energy is injected into the top/bottom columns,
so removing exactly [0, n_top) and [d - n_bottom, d) is optimal by
construction.

Randomness: numpy PCG64 (np.random.default_rng) seeded from the spec;
make_projectors and make_embeddings consume separate children of the same
SeedSequence, so each is reproducible on its own. This generator is a
verification fixture, not a statistical model of real embeddings.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .tensorio import EmbeddingDataset, ProjectorPair


@dataclass(frozen=True)
class PlantedSpec:
    """Everything needed to regenerate one fixture bit-for-bit."""

    d_i: int
    d_t: int
    d: int
    spectrum: np.ndarray  # length d, non-increasing, positive
    n_top: int
    n_bottom: int
    classes: int
    per_class: int
    noise_sigma: float
    seed: int
    nuisance_scale: float = 3.0  # total nuisance energy / class signal energy
    top_fraction: float = 0.5  # share of nuisance energy in the top band

    def __post_init__(self):
        spectrum = np.asarray(self.spectrum, dtype=np.float64)
        object.__setattr__(self, "spectrum", spectrum)
        if spectrum.shape != (self.d,):
            raise ValueError(f"spectrum must have length d={self.d}")
        if (spectrum <= 0).any() or (np.diff(spectrum) > 0).any():
            raise ValueError("spectrum must be positive and non-increasing")
        if self.n_top + self.n_bottom >= self.d:
            raise ValueError("n_top + n_bottom must leave a non-empty middle band")
        if self.d > min(self.d_i, self.d_t):
            raise ValueError("d must be <= min(d_i, d_t) for orthonormal factors")
        if self.classes > self.middle_width:
            raise ValueError("need middle band width >= number of classes")
        if not 0.0 <= self.top_fraction <= 1.0:
            raise ValueError("top_fraction must lie in [0, 1]")

    @property
    def middle_width(self) -> int:
        return self.d - self.n_top - self.n_bottom

    @property
    def middle(self) -> range:
        return range(self.n_top, self.d - self.n_bottom)


@dataclass(frozen=True)
class PlantedGroundTruth:
    """The factors the generator actually used."""

    u: np.ndarray  # d_i x d
    v: np.ndarray  # d_t x d
    sigma: np.ndarray  # length d
    n_top: int
    n_bottom: int

    @property
    def u_middle(self) -> np.ndarray:
        return self.u[:, self.n_top:self.u.shape[1] - self.n_bottom]

    @property
    def v_middle(self) -> np.ndarray:
        return self.v[:, self.n_top:self.v.shape[1] - self.n_bottom]


def banded_spectrum(d: int, n_top: int, n_bottom: int, top_value: float = 10.0,
                    middle_value: float = 1.0, bottom_value: float = 0.1) -> np.ndarray:
    """Spiky-top / flat-middle / decaying-bottom profile with small gaps at
    the band boundaries so the planted subspaces stay identifiable."""
    parts = []
    if n_top:
        parts.append(np.geomspace(top_value, middle_value * 1.05, n_top))
    parts.append(np.full(d - n_top - n_bottom, middle_value))
    if n_bottom:
        parts.append(np.geomspace(middle_value * 0.95, bottom_value, n_bottom))
    return np.concatenate(parts)


def _orthonormal(rng, rows: int, cols: int) -> np.ndarray:
    """QR-based orthonormal columns, sign-fixed for determinism."""
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def _rngs(spec: PlantedSpec):
    children = np.random.SeedSequence(spec.seed).spawn(2)
    return np.random.default_rng(children[0]), np.random.default_rng(children[1])


def make_projectors(spec: PlantedSpec):
    """Build the planted pair; returns (ProjectorPair, PlantedGroundTruth).

    Warns (does not fail) when the spectrum repeats across a band
    boundary, since the middle subspace is then not identifiable.
    """
    rng, _ = _rngs(spec)
    u = _orthonormal(rng, spec.d_i, spec.d)
    v = _orthonormal(rng, spec.d_t, spec.d)
    o = _orthonormal(rng, spec.d, spec.d)
    sigma = spec.spectrum
    for boundary in (spec.n_top, spec.d - spec.n_bottom):
        if 0 < boundary < spec.d and sigma[boundary - 1] == sigma[boundary]:
            warnings.warn(
                f"spectrum repeats across band boundary {boundary}; "
                "planted subspace is not identifiable there",
                stacklevel=2,
            )
    root = np.sqrt(sigma)
    pair = ProjectorPair(w_i=(o * root) @ u.T, w_t=(o * root) @ v.T)
    truth = PlantedGroundTruth(u=u, v=v, sigma=sigma, n_top=spec.n_top,
                               n_bottom=spec.n_bottom)
    return pair, truth


def make_embeddings(spec: PlantedSpec, truth: PlantedGroundTruth):
    """Class-structured image/text features; returns the two datasets.

    Per sample: middle-band class code (unit energy) + top/bottom nuisance
    with total energy nuisance_scale + isotropic noise_sigma noise. Image
    and text draws are independent but share the class codes, mirroring
    content shared across modalities.
    """
    _, rng = _rngs(spec)
    codes = _orthonormal(rng, spec.middle_width, spec.classes)  # one unit code per class
    labels = np.repeat(np.arange(spec.classes, dtype=np.int64), spec.per_class)
    n = labels.size
    top_sigma = np.sqrt(spec.nuisance_scale * spec.top_fraction / max(spec.n_top, 1))
    bot_sigma = np.sqrt(spec.nuisance_scale * (1.0 - spec.top_fraction) / max(spec.n_bottom, 1))

    def _modality(basis):
        mid = basis[:, spec.n_top:spec.d - spec.n_bottom]
        top = basis[:, :spec.n_top]
        bottom = basis[:, spec.d - spec.n_bottom:]
        feats = codes.T[labels] @ mid.T
        if spec.n_top:
            feats = feats + (top_sigma * rng.standard_normal((n, spec.n_top))) @ top.T
        if spec.n_bottom:
            feats = feats + (bot_sigma * rng.standard_normal((n, spec.n_bottom))) @ bottom.T
        if spec.noise_sigma > 0:
            feats = feats + spec.noise_sigma * rng.standard_normal(feats.shape)
        return feats

    def _dataset(feats, name):
        idx = np.arange(n, dtype=np.int64)
        return EmbeddingDataset(features=feats, labels=labels, query_idx=idx,
                                gallery_idx=idx, exclude_self=True, name=name)

    image = _modality(truth.u)
    text = _modality(truth.v)
    return _dataset(image, "planted_image"), _dataset(text, "planted_text")
