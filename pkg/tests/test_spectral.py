import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isoclip import errors, spectral
from oracles import gram_eigen_singular_values


def test_svd_diagonal():
    dec = spectral.svd(np.diag([3.0, 1.0]))
    assert np.allclose(dec.s, [3.0, 1.0])
    assert np.allclose(dec.u, np.eye(2))
    assert np.allclose(dec.v, np.eye(2))


def test_svd_zero_matrix():
    dec = spectral.svd(np.zeros((2, 2)))
    assert dec.r == 0
    assert dec.s.size == 0
    assert dec.u.shape == (2, 0) and dec.v.shape == (2, 0)


def test_svd_against_gram_oracle():
    rng = np.random.default_rng(123)
    m = rng.standard_normal((8, 5))
    dec = spectral.svd(m)
    assert np.linalg.norm(m - dec.reconstruct()) <= 1e-12 * np.linalg.norm(m)
    oracle = gram_eigen_singular_values(m)[: dec.r]
    assert np.max(np.abs(dec.s - oracle) / oracle) < 1e-10


def test_svd_orthonormal_factors():
    rng = np.random.default_rng(7)
    m = rng.standard_normal((12, 9))
    dec = spectral.svd(m)
    assert np.abs(dec.u.T @ dec.u - np.eye(dec.r)).max() <= 1e-10
    assert np.abs(dec.v.T @ dec.v - np.eye(dec.r)).max() <= 1e-10


def test_svd_sign_convention_and_determinism():
    rng = np.random.default_rng(11)
    m = rng.standard_normal((6, 6))
    first = spectral.svd(m)
    second = spectral.svd(m.copy())
    # bitwise equality across calls
    assert np.array_equal(first.u, second.u)
    assert np.array_equal(first.s, second.s)
    assert np.array_equal(first.v, second.v)
    for j in range(first.r):
        col = first.u[:, j]
        assert col[np.argmax(np.abs(col))] >= 0


def test_svd_rejects_non_finite():
    with pytest.raises(errors.NonFiniteInputError):
        spectral.svd(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_svd_transpose_shares_singular_values():
    rng = np.random.default_rng(21)
    m = rng.standard_normal((10, 6))
    s_fwd = spectral.svd(m).s
    s_bwd = spectral.svd(m.T).s
    assert np.max(np.abs(s_fwd - s_bwd)) <= 1e-10


def test_numerical_rank_basic():
    assert spectral.numerical_rank(np.array([3.0, 1.0]), 2, 2) == 2
    assert spectral.numerical_rank(np.array([1.0, 1e-20]), 2, 2) == 1
    assert spectral.numerical_rank(np.array([]), 2, 2) == 0
    assert spectral.numerical_rank(np.array([0.0, 0.0]), 2, 2) == 0


def test_numerical_rank_planted_product():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((3, 6))
    b = rng.standard_normal((3, 6))
    s = spectral.singular_values(a.T @ b)
    assert spectral.numerical_rank(s, 6, 6) == 3


def test_whiten_diagonal():
    assert np.allclose(spectral.whiten(np.diag([5.0, 2.0])), np.eye(2), atol=1e-12)


def test_whiten_orthonormal_rows_unchanged():
    rng = np.random.default_rng(9)
    q, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    w = q.T  # 3 x 6 with orthonormal rows
    assert np.abs(spectral.whiten(w) - w).max() <= 1e-10


def test_whiten_flat_spectrum_and_row_space():
    rng = np.random.default_rng(17)
    w = rng.standard_normal((4, 6))
    white = spectral.whiten(w)
    s = spectral.svd(white).s
    assert np.abs(s - 1.0).max() <= 1e-10
    # row spaces agree: projectors onto them coincide
    def row_projector(mat):
        dec = spectral.svd(mat)
        return dec.v @ dec.v.T
    assert np.abs(row_projector(w) - row_projector(white)).max() <= 1e-10


def test_whiten_rank0_degenerate():
    with pytest.raises(errors.DegenerateMatrixError):
        spectral.whiten(np.zeros((3, 3)))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 10), n=st.integers(2, 10))
def test_whiten_idempotent(seed, m, n):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((m, n))
    once = spectral.whiten(w)
    twice = spectral.whiten(once)
    assert np.abs(once - twice).max() <= 1e-10


def test_reconstruction_idempotent():
    rng = np.random.default_rng(31)
    m = rng.standard_normal((7, 7))
    first = spectral.svd(m).reconstruct()
    second = spectral.svd(first).reconstruct()
    assert np.abs(first - second).max() <= 1e-12 * np.abs(first).max()
