"""
Dense linear-algebra kernel.

Matrices are plain 2-D ``float64`` numpy arrays in C (row-major) order.
``as_matrix`` is the validating constructor; every public entry point of
the package funnels its inputs through it.
"""

import math

import numpy as np

from .rng import RandomSource, gaussian_matrix


class ShapeError(ValueError):
    """Raised when matrix shapes do not conform."""


def as_matrix(a, name="matrix"):
    """Return `a` as a finite, C-contiguous float64 2-D array.

    Raises ``ValueError`` on NaN/Inf entries or on a non-2-D input.
    """
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def matmul(a, b):
    """Product ``a @ b`` with a shape check that names both operands."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def frobenius_norm(a):
    a = np.asarray(a, dtype=np.float64)
    return math.sqrt(float(np.sum(a * a)))


def householder_qr(a):
    """
    Thin QR factorisation by Householder reflections.

    Parameters
    ----------
    a : array_like, shape (rows, cols)
        Input with ``rows >= cols``. Rank deficiency is allowed.

    Returns
    -------
    q : ndarray, shape (rows, cols)
        Orthonormal columns.
    r : ndarray, shape (cols, cols)
        Upper triangular with a nonnegative diagonal; entries below the
        diagonal are exactly zero.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"householder_qr expects a 2-D matrix, got {a.shape}")
    rows, cols = a.shape
    if rows < cols:
        raise ShapeError(f"thin QR needs rows >= cols, got {a.shape}")

    r = np.array(a, dtype=np.float64, order="C")
    reflectors = []
    for j in range(cols):
        x = r[j:, j]
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            reflectors.append(None)
            continue
        alpha = -math.copysign(norm_x, x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        r[j:, j:] -= 2.0 * np.outer(v, v @ r[j:, j:])
        reflectors.append(v)

    q = np.eye(rows, cols)
    for j in range(cols - 1, -1, -1):
        v = reflectors[j]
        if v is None:
            continue
        q[j:, :] -= 2.0 * np.outer(v, v @ q[j:, :])

    r = np.triu(r[:cols, :])
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    q *= signs
    r *= signs[:, None]
    return q, r


def orthonormalize(a):
    """Orthonormal basis for the column space of `a` (the Q of a thin QR)."""
    return householder_qr(a)[0]


def spectral_norm_sq(a, iters=100, seed=0):
    """Power-iteration estimate of the largest eigenvalue of ``a.T @ a``.

    The start vector is Gaussian, drawn from ``seed``; the result is the
    Rayleigh quotient after `iters` multiplications by the Gram matrix.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    a = np.asarray(a, dtype=np.float64)
    gram = a.T @ a
    v = gaussian_matrix(RandomSource(seed), gram.shape[0], 1, 1.0)[:, 0]
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iters):
        w = gram @ v
        estimate = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
    return max(estimate, 0.0)
