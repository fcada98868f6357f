import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcsnmf.densela import (
    ShapeError,
    as_matrix,
    frobenius_norm,
    householder_qr,
    matmul,
    spectral_norm_sq,
)


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def jacobi_eigenvalues(sym, sweeps=50):
    """Cyclic Jacobi rotations on a small symmetric matrix."""
    a = np.array(sym, dtype=float)
    n = a.shape[0]
    for _ in range(sweeps):
        off = math.sqrt(sum(a[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off < 1e-15:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return sorted(np.diag(a))


def test_as_matrix_rejects_non_finite():
    with pytest.raises(ValueError):
        as_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        as_matrix([[np.inf]])
    with pytest.raises(ValueError):
        as_matrix([1.0, 2.0])


class TestMatmul:
    def test_identity(self):
        a = np.arange(12.0).reshape(3, 4)
        assert np.array_equal(matmul(np.eye(3), a), a)

    def test_zero_annihilator(self):
        out = matmul([[1.0, 2.0], [3.0, 4.0]], [[0.0], [0.0]])
        assert np.array_equal(out, np.zeros((2, 1)))

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((4, 3))
        b = rng.standard_normal((3, 5))
        assert np.max(np.abs(matmul(a, b) - naive_matmul(a, b))) <= 1e-14

    def test_shape_mismatch_names_both(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(1, 6))
    def test_associativity(self, seed, n, k, l, m):
        rng = np.random.default_rng(seed)
        a, b, c = rng.standard_normal((n, k)), rng.standard_normal((k, l)), rng.standard_normal((l, m))
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        scale = frobenius_norm(left) or 1.0
        assert frobenius_norm(left - right) / scale <= 1e-10


class TestFrobenius:
    def test_identity(self):
        assert frobenius_norm(np.eye(2)) == pytest.approx(math.sqrt(2), abs=1e-15)

    def test_zero(self):
        assert frobenius_norm(np.zeros((5, 5))) == 0.0

    def test_pythagorean(self):
        assert frobenius_norm([[3.0, 4.0]]) == 5.0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 8))
    def test_square_is_gram_trace(self, seed, r, c):
        a = np.random.default_rng(seed).standard_normal((r, c))
        assert frobenius_norm(a) ** 2 == pytest.approx(np.trace(a.T @ a), rel=1e-12)


class TestHouseholderQR:
    def test_identity(self):
        q, r = householder_qr(np.eye(4))
        assert np.array_equal(q, np.eye(4))
        assert np.array_equal(r, np.eye(4))

    def test_single_column(self):
        q, r = householder_qr([[3.0], [4.0]])
        assert q == pytest.approx(np.array([[0.6], [0.8]]), abs=1e-15)
        assert r == pytest.approx(np.array([[5.0]]), abs=1e-15)

    def test_random_tall(self):
        a = np.random.default_rng(3).standard_normal((10, 4))
        q, r = householder_qr(a)
        assert frobenius_norm(q.T @ q - np.eye(4)) <= 1e-12
        assert frobenius_norm(q @ r - a) / frobenius_norm(a) <= 1e-12

    def test_agrees_with_lapack_up_to_signs(self):
        a = np.random.default_rng(4).standard_normal((12, 5))
        q, r = householder_qr(a)
        q_ref, r_ref = np.linalg.qr(a)
        signs = np.sign(np.diag(r_ref))
        assert np.allclose(q, q_ref * signs, atol=1e-12)
        assert np.allclose(r, r_ref * signs[:, None], atol=1e-12)

    def test_rank_deficient(self):
        col = np.arange(1.0, 7.0)[:, None]
        a = np.hstack([col, 2 * col, np.zeros((6, 1))])
        q, r = householder_qr(a)
        assert np.all(np.diag(r) >= 0.0)
        assert frobenius_norm(q @ r - a) / frobenius_norm(a) <= 1e-12
        assert np.all(np.isfinite(q))

    def test_wide_rejected(self):
        with pytest.raises(ShapeError):
            householder_qr(np.ones((2, 3)))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 12))
    def test_properties(self, seed, rows, cols):
        rows = max(rows, cols)
        a = np.random.default_rng(seed).standard_normal((rows, cols))
        q, r = householder_qr(a)
        assert q.shape == (rows, cols) and r.shape == (cols, cols)
        assert frobenius_norm(q.T @ q - np.eye(cols)) <= 1e-12 * cols
        assert np.all(np.tril(r, -1) == 0.0)
        assert np.all(np.diag(r) >= 0.0)
        assert frobenius_norm(q @ r - a) / frobenius_norm(a) <= 1e-12


class TestSpectralNormSq:
    def test_identity(self):
        for iters in (1, 5):
            assert spectral_norm_sq(np.eye(3), iters=iters, seed=1) == pytest.approx(1.0, abs=1e-15)

    def test_diagonal(self):
        assert spectral_norm_sq(np.diag([3.0, 1.0]), iters=100, seed=0) == pytest.approx(9.0, abs=1e-10)

    def test_against_jacobi(self):
        a = np.random.default_rng(11).standard_normal((6, 4))
        expected = jacobi_eigenvalues(a.T @ a)[-1]
        assert spectral_norm_sq(a, iters=500, seed=5) == pytest.approx(expected, rel=1e-6)

    def test_deterministic(self):
        a = np.random.default_rng(2).standard_normal((5, 3))
        assert spectral_norm_sq(a, 3, seed=9) == spectral_norm_sq(a, 3, seed=9)

    def test_zero_matrix(self):
        assert spectral_norm_sq(np.zeros((3, 2)), iters=4) == 0.0

    def test_bad_iters(self):
        with pytest.raises(ValueError):
            spectral_norm_sq(np.eye(2), iters=0)
