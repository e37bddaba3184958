"""Core method: spectral band selection on the inter-modal operator and
training-free projector alignment.

The product psi = W_i^T @ W_t is the single operator through which every
image-text cosine similarity flows. Its singular spectrum is strongly
anisotropic at both ends and approximately flat in a middle band; keeping
only that band and projecting each head onto the corresponding singular
subspace aligns both modalities to the shared subspace:

    W_i_hat = W_i @ U_S @ U_S^T        W_t_hat = W_t @ V_S @ V_S^T

where U_S / V_S hold the retained left/right singular vectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import spectral
from .errors import BandEmptyError, StaleBandError
from .spectral import SpectralDecomposition, numerical_rank
from .tensorio import ProjectorPair, read_tensor, write_tensor


@dataclass(frozen=True)
class InterModalOperator:
    """psi = W_i^T @ W_t together with its spectral decomposition."""

    psi: np.ndarray
    decomposition: SpectralDecomposition
    pair: ProjectorPair

    @property
    def r(self) -> int:
        return self.decomposition.r


@dataclass(frozen=True)
class BandSelection:
    """Retained index range [k_t, r - k_b) of the singular spectrum.

    Half-open on the right: k_t = k_b = 0 keeps exactly r directions. (A
    closed interval would keep one extra column; immaterial at realistic
    band sizes, but the convention is fixed here.)
    """

    k_t: int
    k_b: int
    r: int

    def __post_init__(self):
        if self.k_t < 0 or self.k_b < 0:
            raise ValueError("k_t and k_b must be non-negative")
        if self.k_t + self.k_b >= self.r:
            raise BandEmptyError(
                f"k_t + k_b = {self.k_t + self.k_b} >= r = {self.r}: empty band"
            )

    @property
    def retained(self) -> range:
        return range(self.k_t, self.r - self.k_b)

    @property
    def width(self) -> int:
        return self.r - self.k_t - self.k_b


@dataclass(frozen=True)
class AlignedProjectors:
    """Projector pair restricted to a spectral band of psi."""

    w_i_hat: np.ndarray
    w_t_hat: np.ndarray
    band: BandSelection
    u_s: np.ndarray
    v_s: np.ndarray

    def as_pair(self) -> ProjectorPair:
        return ProjectorPair(w_i=self.w_i_hat, w_t=self.w_t_hat)


def inter_modal_operator(pair: ProjectorPair) -> InterModalOperator:
    """Build psi = W_i^T @ W_t and decompose it."""
    w_i = np.asarray(pair.w_i, dtype=np.float64)
    w_t = np.asarray(pair.w_t, dtype=np.float64)
    psi = w_i.T @ w_t
    return InterModalOperator(psi=psi, decomposition=spectral.svd(psi), pair=pair)


def select_band(op: InterModalOperator, k_t: int, k_b: int) -> BandSelection:
    """Retain singular directions [k_t, r - k_b) of op's spectrum."""
    return BandSelection(k_t=int(k_t), k_b=int(k_b), r=op.r)


def align_projectors(pair: ProjectorPair, band: BandSelection,
                     op: InterModalOperator | None = None) -> AlignedProjectors:
    """Project both heads onto the band's left/right singular subspaces.

    ``op`` may be passed to reuse an existing decomposition of this pair's
    psi; otherwise it is recomputed (deterministically, so the result is
    identical). A band whose r does not match the decomposition is stale.
    """
    if op is None:
        op = inter_modal_operator(pair)
    if band.r != op.r:
        raise StaleBandError(f"band was selected at r={band.r}, operator has r={op.r}")
    dec = op.decomposition
    sel = slice(band.k_t, band.r - band.k_b)
    u_s = dec.u[:, sel]
    v_s = dec.v[:, sel]
    w_i = np.asarray(pair.w_i, dtype=np.float64)
    w_t = np.asarray(pair.w_t, dtype=np.float64)
    w_i_hat = w_i @ u_s @ u_s.T
    w_t_hat = w_t @ v_s @ v_s.T
    return AlignedProjectors(w_i_hat=w_i_hat, w_t_hat=w_t_hat, band=band, u_s=u_s, v_s=v_s)


def band_truncated_psi(op: InterModalOperator, band: BandSelection) -> np.ndarray:
    """U_S @ diag(S_band) @ V_S^T, the band-restricted operator."""
    sel = slice(band.k_t, band.r - band.k_b)
    dec = op.decomposition
    return (dec.u[:, sel] * dec.s[sel]) @ dec.v[:, sel].T


def band_variants(op: InterModalOperator, width: int):
    """Top/middle/bottom bands of a common width, for spectrum-region probes.

    top keeps [0, width), bottom keeps [r - width, r), middle keeps
    [floor(r/2 - width/2), floor(r/2 + width/2)) which always spans exactly
    ``width`` indices.
    """
    r = op.r
    width = int(width)
    if width > r:
        raise ValueError(f"width {width} exceeds rank {r}")
    if width < 1:
        raise ValueError("width must be >= 1")
    top = BandSelection(k_t=0, k_b=r - width, r=r)
    lo = int(np.floor(r / 2 - width / 2))
    hi = int(np.floor(r / 2 + width / 2))
    middle = BandSelection(k_t=lo, k_b=r - hi, r=r)
    bottom = BandSelection(k_t=r - width, k_b=0, r=r)
    return top, middle, bottom


def intra_operator_spectrum(w):
    """Eigenvalues of W^T W (the squared singular values of W), plus the
    sum-normalized spectrum.

    Returns (eigenvalues, normalized), both non-increasing, length
    min(m, n); after band alignment the tail is (numerically) zero, which
    is the point of inspecting this spectrum.
    """
    s = spectral.singular_values(w)
    eig = s**2
    total = eig.sum()
    normalized = eig / total if total > 0 else np.zeros_like(eig)
    return eig, normalized


def nonzero_eigenvalue_count(eigenvalues, m: int, n: int) -> int:
    """Rank-rule count of numerically non-zero intra-operator eigenvalues."""
    s = np.sqrt(np.maximum(np.asarray(eigenvalues, dtype=np.float64), 0.0))
    return numerical_rank(s, m, n)


def save_aligned(aligned: AlignedProjectors, out_dir) -> None:
    """Write w_i_hat.iso, w_t_hat.iso and a band.json sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tensor(out_dir / "w_i_hat.iso", aligned.w_i_hat)
    write_tensor(out_dir / "w_t_hat.iso", aligned.w_t_hat)
    sidecar = {"k_t": aligned.band.k_t, "k_b": aligned.band.k_b, "r": aligned.band.r}
    (out_dir / "band.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_aligned_pair(in_dir):
    """Read back an aligned pair written by save_aligned.

    Returns (ProjectorPair of the aligned heads, BandSelection).
    """
    in_dir = Path(in_dir)
    w_i_hat = read_tensor(in_dir / "w_i_hat.iso")
    w_t_hat = read_tensor(in_dir / "w_t_hat.iso")
    sidecar = json.loads((in_dir / "band.json").read_text())
    band = BandSelection(k_t=sidecar["k_t"], k_b=sidecar["k_b"], r=sidecar["r"])
    return ProjectorPair(w_i=w_i_hat, w_t=w_t_hat), band
