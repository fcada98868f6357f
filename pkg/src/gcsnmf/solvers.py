"""
Nonnegative least-squares solvers for ``min_{H >= 0} 1/2 ||B - A H||_F^2``.

Both NMF half-updates reduce to this form: the F-update directly
(A = G, B = X) and the G-update by transposition (A = F^T, B = X^T).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .densela import ShapeError, spectral_norm_sq

logger = logging.getLogger(__name__)


@dataclass
class NnlsResult:
    h: np.ndarray
    objective: float
    inner_iters: int
    capped: bool = False


def objective(a, b, h):
    """Half the squared Frobenius residual ``1/2 ||B - A H||_F^2``."""
    r = b - a @ h
    return 0.5 * float(np.sum(r * r))


def _check_shapes(a, b, h=None):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(f"A {a.shape} and B {b.shape} must share their row count")
    if h is not None:
        h = np.asarray(h, dtype=np.float64)
        if h.shape != (a.shape[1], b.shape[1]):
            raise ShapeError(f"H0 has shape {h.shape}, expected {(a.shape[1], b.shape[1])}")
    return a, b, h


def gradient_scale(a, b):
    """``1 + max|A^T B|``, the scale that makes solver tolerances unit-free."""
    return 1.0 + float(np.max(np.abs(a.T @ b)))


def kkt_certificate(a, b, h, tol):
    """
    Check the KKT conditions of the NNLS problem at `h`.

    With ``g = A^T (A h - b)`` and ``s = gradient_scale(a, b)``, every
    column must satisfy ``h >= 0``, ``g >= -tol*s`` and
    ``|h*g| <= tol*s*(1 + ||g||_inf)``. Returns ``(ok, details)``.
    """
    a, b, h = _check_shapes(a, b, h)
    g = a.T @ (a @ h - b)
    s = gradient_scale(a, b)
    g_inf = np.max(np.abs(g), axis=0)
    min_h = float(np.min(h))
    min_g = float(np.min(g))
    slack = np.max(np.abs(h * g), axis=0) / (1.0 + g_inf)
    max_slack = float(np.max(slack))
    ok = min_h >= 0.0 and min_g >= -tol * s and max_slack <= tol * s
    return ok, {"min_h": min_h, "min_grad": min_g, "max_slack": max_slack, "scale": s}


def _passive_solve(gram, rhs, passive, ridge):
    """
    Least squares restricted to each column's passive set.

    Columns with identical passive sets share a single Cholesky
    factorisation; groups are visited in sorted order of their pattern.
    """
    k, ncol = rhs.shape
    z = np.zeros((k, ncol))
    if ncol == 0:
        return z
    patterns, inverse = np.unique(passive.T, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    for g, pattern in enumerate(patterns):
        idx = np.flatnonzero(pattern)
        if idx.size == 0:
            continue
        cols = np.flatnonzero(inverse == g)
        sub = gram[np.ix_(idx, idx)]
        target = rhs[np.ix_(idx, cols)]
        try:
            factor = cho_factor(sub, lower=False, check_finite=False)
            sol = cho_solve(factor, target, check_finite=False)
            if not np.all(np.isfinite(sol)):
                raise LinAlgError("non-finite passive-set solution")
        except LinAlgError:
            factor = cho_factor(sub + ridge * np.eye(idx.size), lower=False, check_finite=False)
            sol = cho_solve(factor, target, check_finite=False)
        z[np.ix_(idx, cols)] = sol
    return z


def nnls_active_set(a, b, tol=1e-10):
    """
    Active-set NNLS for many right-hand sides.

    Lawson-Hanson pivoting run on all columns of B at once, sharing
    ``A^T A`` and ``A^T B``; columns whose passive sets coincide are
    solved together (the fast combinatorial variant). Each column may
    pivot at most ``3 * cols(A)`` times; a column that reaches the cap
    keeps its current feasible iterate and the result is flagged
    ``capped``.

    Parameters
    ----------
    a : array_like, shape (r, k)
    b : array_like, shape (r, c)
    tol : float
        Optimality tolerance on the gradient, relative to
        :func:`gradient_scale`.

    Returns
    -------
    NnlsResult
        ``inner_iters`` counts the sweeps of the pivoting loop.
    """
    a, b, _ = _check_shapes(a, b)
    gram = a.T @ a
    atb = a.T @ b
    k, ncol = atb.shape
    thresh = tol * (1.0 + float(np.max(np.abs(atb))))
    ridge = 1e-12 * float(np.trace(gram)) / k
    if ridge == 0.0:
        ridge = 1e-12
    max_pivots = 3 * k

    # feasible start: unconstrained solution clipped to its positive support
    passive = np.ones((k, ncol), dtype=bool)
    x = _passive_solve(gram, atb, passive, ridge)
    passive = x > 0.0
    x = np.where(passive, x, 0.0)

    pivots = np.zeros(ncol, dtype=int)
    active_cols = np.ones(ncol, dtype=bool)
    capped = False
    sweeps = 0
    while active_cols.any():
        sweeps += 1
        cols = np.flatnonzero(active_cols)
        z = _passive_solve(gram, atb[:, cols], passive[:, cols], ridge)
        z[~passive[:, cols]] = 0.0
        infeasible = (z < 0.0) & passive[:, cols]
        bad = infeasible.any(axis=0)

        if bad.any():
            # step from the feasible x towards z until the first passive
            # variable hits zero, then release it
            bc = cols[bad]
            xb = x[:, bc]
            zb = z[:, bad]
            neg = infeasible[:, bad]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(neg, xb / (xb - zb), np.inf)
            step = np.min(ratio, axis=0)
            xb = xb + (zb - xb) * step
            hit = neg & (ratio <= step)
            # anything pushed to (or below) zero also leaves the passive set
            hit |= passive[:, bc] & (xb <= 0.0)
            xb[hit] = 0.0
            x[:, bc] = xb
            pb = passive[:, bc]
            pb[hit] = False
            passive[:, bc] = pb
            pivots[bc] += 1

        good = ~bad
        if good.any():
            gc = cols[good]
            x[:, gc] = z[:, good]
            neg_grad = atb[:, gc] - gram @ x[:, gc]
            candidates = np.where(passive[:, gc], -np.inf, neg_grad)
            best = np.argmax(candidates, axis=0)
            best_val = candidates[best, np.arange(gc.size)]
            optimal = best_val <= thresh
            active_cols[gc[optimal]] = False
            grow = gc[~optimal]
            passive[best[~optimal], grow] = True
            pivots[grow] += 1

        over = active_cols & (pivots >= max_pivots)
        if over.any():
            capped = True
            active_cols[over] = False
            logger.warning("active-set pivot cap reached on %d column(s)", int(over.sum()))

    x = np.maximum(x, 0.0)
    return NnlsResult(h=x, objective=objective(a, b, x), inner_iters=sweeps, capped=capped)


def _projected_gradient(h, grad):
    return np.where(h > 0.0, grad, np.minimum(grad, 0.0))


@njit(cache=True)
def _nesterov_loop(gram, atb, h0, step, max_inner, stop_sq):
    k, c = h0.shape
    h = h0.copy()
    y = h0.copy()
    h_next = np.empty_like(h)
    # gradients at h and y; the one at y follows from linearity, so each
    # step costs a single product with the Gram matrix
    grad_h = gram @ h - atb
    grad_y = grad_h.copy()
    grad_next = np.empty_like(h)
    alpha = 1.0
    iters = 0
    for it in range(1, max_inner + 1):
        iters = it
        for i in range(k):
            for j in range(c):
                v = y[i, j] - step * grad_y[i, j]
                h_next[i, j] = v if v > 0.0 else 0.0
        alpha_next = 0.5 * (1.0 + np.sqrt(4.0 * alpha * alpha + 1.0))
        beta = (alpha - 1.0) / alpha_next
        pg_sq = 0.0
        for i in range(k):
            for j in range(c):
                acc = -atb[i, j]
                for l in range(k):
                    acc += gram[i, l] * h_next[l, j]
                grad_next[i, j] = acc
                if h_next[i, j] > 0.0 or acc < 0.0:
                    pg_sq += acc * acc
        for i in range(k):
            for j in range(c):
                y[i, j] = h_next[i, j] + beta * (h_next[i, j] - h[i, j])
                grad_y[i, j] = grad_next[i, j] + beta * (grad_next[i, j] - grad_h[i, j])
                h[i, j] = h_next[i, j]
                grad_h[i, j] = grad_next[i, j]
        alpha = alpha_next
        if pg_sq <= stop_sq:
            break
    return h, iters


def nnls_nesterov(a, b, h0, max_inner=500, tol=1e-6):
    """
    Nesterov-accelerated projected gradient NNLS, warm-started at `h0`.

    Step size is ``1 / L`` with L the power-iteration estimate of
    ``||A^T A||_2``. Stops when the projected-gradient norm drops below
    ``tol`` times its value at `h0`, or after `max_inner` steps. If the
    final objective is worse than the one at `h0`, `h0` is returned.
    """
    a, b, h0 = _check_shapes(a, b, h0)
    if np.any(h0 < 0.0):
        raise ValueError("h0 must be entrywise nonnegative")
    gram = a.T @ a
    atb = a.T @ b
    lipschitz = spectral_norm_sq(a, iters=100, seed=0)

    h = np.ascontiguousarray(h0)
    pg0 = np.linalg.norm(_projected_gradient(h, gram @ h - atb))
    if pg0 == 0.0 or lipschitz == 0.0:
        return NnlsResult(h=h, objective=objective(a, b, h), inner_iters=0)

    h, iters = _nesterov_loop(gram, atb, h, 1.0 / lipschitz, max_inner, (tol * pg0) ** 2)

    obj = objective(a, b, h)
    obj0 = objective(a, b, h0)
    if obj > obj0:
        return NnlsResult(h=h0.copy(), objective=obj0, inner_iters=iters)
    return NnlsResult(h=h, objective=obj, inner_iters=iters)
