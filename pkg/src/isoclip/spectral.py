"""Deterministic dense SVD, numerical rank, and projector whitening.

All spectral computation runs in float64 regardless of input dtype; the
tolerance budgets downstream are unreachable in float32 at the matrix
sizes involved (up to ~1024 x 1024).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMatrixError, NonFiniteInputError

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class SpectralDecomposition:
    """Rank-truncated SVD: M ~ u @ diag(s) @ v.T with orthonormal columns.

    Columns are sign-normalized so that the largest-magnitude entry of each
    u column is non-negative (v flips to match), which makes the
    factorization deterministic; the projectors u @ u.T built downstream
    are sign-invariant either way.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    r: int

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T

    def truncated(self) -> np.ndarray:
        """Alias kept for readability at call sites dealing with bands."""
        return self.reconstruct()


def numerical_rank(s: np.ndarray, m: int, n: int) -> int:
    """Count singular values above sigma_1 * max(m, n) * eps (float64)."""
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0 or s[0] == 0.0:
        return 0
    threshold = s[0] * max(m, n) * _EPS
    return int(np.count_nonzero(s > threshold))


def svd(matrix) -> SpectralDecomposition:
    """Rank-truncated, sign-normalized SVD of a dense matrix.

    Raises NonFiniteInputError on NaN/inf entries. A zero matrix yields
    r = 0 with empty factors.
    """
    m_arr = np.asarray(matrix, dtype=np.float64)
    if m_arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m_arr.ndim}")
    if not np.isfinite(m_arr).all():
        raise NonFiniteInputError("matrix contains NaN or infinite entries")
    m, n = m_arr.shape
    u, s, vt = np.linalg.svd(m_arr, full_matrices=False)
    r = numerical_rank(s, m, n)
    u, s, v = u[:, :r].copy(), s[:r].copy(), vt[:r].T.copy()
    for j in range(r):
        pivot = np.argmax(np.abs(u[:, j]))
        if u[pivot, j] < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return SpectralDecomposition(u=u, s=s, v=v, r=r)


def singular_values(matrix) -> np.ndarray:
    """All min(m, n) singular values, without rank truncation."""
    m_arr = np.asarray(matrix, dtype=np.float64)
    if not np.isfinite(m_arr).all():
        raise NonFiniteInputError("matrix contains NaN or infinite entries")
    return np.linalg.svd(m_arr, compute_uv=False)


def whiten(w) -> np.ndarray:
    """Flatten the spectrum of a projector: W = U S V^T -> U V^T.

    Every non-zero singular value of the result is 1 and the row space is
    preserved. Raises DegenerateMatrixError for rank-0 input.
    """
    dec = svd(w)
    if dec.r == 0:
        raise DegenerateMatrixError("cannot whiten a rank-0 matrix")
    return dec.u @ dec.v.T
