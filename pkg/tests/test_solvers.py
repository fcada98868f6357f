import itertools

import numpy as np
import pytest

from gcsnmf.densela import ShapeError
from gcsnmf.solvers import kkt_certificate, nnls_active_set, nnls_nesterov, objective


def enumerate_nnls(a, b):
    """Exhaustive NNLS: best feasible least-squares fit over every support."""
    k = a.shape[1]
    out = np.zeros((k, b.shape[1]))
    for j in range(b.shape[1]):
        best, best_h = np.inf, np.zeros(k)
        for size in range(k + 1):
            for support in itertools.combinations(range(k), size):
                h = np.zeros(k)
                if support:
                    sol, *_ = np.linalg.lstsq(a[:, support], b[:, j], rcond=None)
                    if np.any(sol < 0):
                        continue
                    h[list(support)] = sol
                val = 0.5 * np.sum((b[:, j] - a @ h) ** 2)
                if val < best:
                    best, best_h = val, h
        out[:, j] = best_h
    return out


def random_instance(seed, rows=6, cols=3, rhs=4):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((rows, cols)), rng.standard_normal((rows, rhs))


class TestActiveSet:
    def test_clamp_orthogonal(self):
        res = nnls_active_set(np.eye(2), np.array([[1.0], [-1.0]]))
        assert np.array_equal(res.h, np.array([[1.0], [0.0]]))
        assert res.objective == pytest.approx(0.5, abs=1e-15)

    def test_normal_equations_inactive_constraint(self):
        res = nnls_active_set(np.array([[1.0], [1.0]]), np.array([[1.0], [2.0]]))
        assert res.h[0, 0] == pytest.approx(1.5, abs=1e-14)
        assert res.objective == pytest.approx(0.25, abs=1e-14)

    def test_matches_enumeration(self):
        a, b = random_instance(0)
        res = nnls_active_set(a, b)
        ref = enumerate_nnls(a, b)
        assert np.max(np.abs(res.h - ref)) <= 1e-8
        assert res.objective == pytest.approx(objective(a, b, ref), rel=1e-8, abs=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_kkt_and_objective_invariant(self, seed):
        a, b = random_instance(100 + seed, rows=8, cols=4, rhs=6)
        res = nnls_active_set(a, b)
        assert np.all(res.h >= 0.0)
        ok, info = kkt_certificate(a, b, res.h, 1e-8)
        assert ok, info
        assert res.objective == pytest.approx(objective(a, b, res.h), rel=1e-10)
        assert not res.capped

    def test_grouped_columns_equal_individual(self):
        a, b = random_instance(5, rows=10, cols=4, rhs=12)
        together = nnls_active_set(a, b).h
        alone = np.hstack([nnls_active_set(a, b[:, [j]]).h for j in range(12)])
        assert np.max(np.abs(together - alone)) <= 1e-12

    def test_rank_deficient_design_stays_finite(self):
        col = np.arange(1.0, 7.0)[:, None]
        a = np.hstack([col, col, np.ones((6, 1))])
        b = np.random.default_rng(3).random((6, 5))
        res = nnls_active_set(a, b)
        assert np.all(np.isfinite(res.h)) and np.all(res.h >= 0.0)
        ref = enumerate_nnls(a, b)
        assert res.objective == pytest.approx(objective(a, b, ref), rel=1e-8)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nnls_active_set(np.ones((3, 2)), np.ones((4, 2)))


class TestNesterov:
    def test_fixed_point(self):
        b = np.random.default_rng(0).random((4, 3))
        res = nnls_nesterov(np.eye(4), b, b.copy(), max_inner=50, tol=1e-8)
        assert res.inner_iters == 0
        assert np.array_equal(res.h, b)

    def test_separable_projection(self):
        res = nnls_nesterov(np.eye(2), np.array([[1.0], [-1.0]]), np.zeros((2, 1)), max_inner=100, tol=1e-8)
        assert res.h == pytest.approx(np.array([[1.0], [0.0]]), abs=1e-8)

    def test_agrees_with_active_set(self):
        a, b = random_instance(0)
        ne = nnls_nesterov(a, b, np.zeros((3, 4)), max_inner=5000, tol=1e-10)
        asr = nnls_active_set(a, b)
        assert ne.objective == pytest.approx(asr.objective, rel=1e-6)

    @pytest.mark.parametrize("seed", range(20))
    def test_cross_solver_agreement_many_seeds(self, seed):
        a, b = random_instance(500 + seed, rows=9, cols=3, rhs=5)
        ne = nnls_nesterov(a, b, np.zeros((3, 5)), max_inner=5000, tol=1e-10)
        asr = nnls_active_set(a, b)
        assert np.all(ne.h >= 0.0)
        assert ne.objective == pytest.approx(asr.objective, rel=1e-6)

    def test_never_worse_than_start(self):
        rng = np.random.default_rng(8)
        a, b = rng.standard_normal((7, 3)), rng.standard_normal((7, 4))
        h0 = rng.random((3, 4))
        res = nnls_nesterov(a, b, h0, max_inner=1, tol=1e-12)
        assert res.objective <= objective(a, b, h0)

    def test_rejects_negative_start(self):
        with pytest.raises(ValueError):
            nnls_nesterov(np.eye(2), np.ones((2, 1)), -np.ones((2, 1)))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nnls_nesterov(np.eye(2), np.ones((2, 1)), np.ones((3, 1)))


def test_kkt_certificate_rejects_non_optimal():
    a, b = random_instance(1)
    ok, _ = kkt_certificate(a, b, np.zeros((3, 4)) + 0.3, 1e-8)
    assert not ok
