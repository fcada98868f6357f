"""
Compression matrices for compressed NMF and their operation counts.

A left compressor ``L`` has shape (p+nu, n) and is applied as ``L @ X``;
a right compressor ``R`` has shape (m, p+nu) and is applied as ``X @ R``.
Dense compressors are plain arrays. CountGauss compressors are
:class:`CountGaussSketch` objects that support the same ``@`` syntax but
never materialise the sparse factor.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .densela import orthonormalize
from .rng import (
    RandomSource,
    countsketch_dense,
    countsketch_structure,
    gaussian_matrix,
)


class Kind(str, enum.Enum):
    NONE = "vanilla"
    GAUSSIAN = "gc"
    RSI = "rsi"
    COUNTGAUSS = "countgauss"
    STREAM = "gcs"


_FIELDS = {
    Kind.NONE: (),
    Kind.GAUSSIAN: ("nu",),
    Kind.RSI: ("nu", "q"),
    Kind.COUNTGAUSS: ("nu", "mu"),
    Kind.STREAM: ("nu_i", "max_iter"),
}


@dataclass(frozen=True)
class CompressorSpec:
    """
    A compression strategy and its parameters.

    Only the fields relevant to `kind` are meaningful: ``nu`` for Gaussian,
    RSI and CountGauss; ``q`` for RSI; ``mu`` for CountGauss; ``nu_i`` and
    ``max_iter`` for the Gaussian compression stream. ``max_iter`` may be
    ``math.inf``.
    """

    kind: Kind = Kind.NONE
    nu: int = 0
    q: int = 4
    mu: int = 0
    nu_i: int = 0
    max_iter: float = math.inf
    stabilize: bool = True

    @property
    def oversampling(self) -> int:
        if self.kind is Kind.STREAM:
            return self.nu_i
        if self.kind is Kind.NONE:
            return 0
        return self.nu

    def validate(self, n: int, m: int, p: int) -> None:
        if self.kind is Kind.NONE:
            return
        k = p + self.oversampling
        if self.oversampling < 0:
            raise ValueError(f"{self.label}: oversampling must be >= 0")
        if k > min(n, m):
            raise ValueError(f"{self.label}: p+oversampling={k} exceeds min(n, m)={min(n, m)}")
        if self.kind is Kind.RSI and self.q < 0:
            raise ValueError(f"{self.label}: q must be >= 0")
        if self.kind is Kind.COUNTGAUSS:
            if self.mu <= self.nu:
                raise ValueError(f"{self.label}: CountGauss needs mu > nu")
            if p + self.mu > min(n, m):
                raise ValueError(f"{self.label}: p+mu={p + self.mu} exceeds min(n, m)={min(n, m)}")
        if self.kind is Kind.STREAM and not self.max_iter >= 1:
            raise ValueError(f"{self.label}: max_iter must be >= 1 or inf")

    @property
    def label(self) -> str:
        names = _FIELDS[self.kind]
        if not names:
            return self.kind.value
        parts = []
        for name in names:
            value = getattr(self, name)
            if name == "max_iter":
                value = "inf" if math.isinf(value) else int(value)
            parts.append(f"{name}={value}")
        return f"{self.kind.value}:" + ",".join(parts)

    @classmethod
    def parse(cls, text: str) -> CompressorSpec:
        """Parse labels such as ``"gcs:nu_i=10,max_iter=1"`` or ``"rsi:nu=10,q=4"``."""
        head, _, tail = text.strip().partition(":")
        try:
            kind = Kind(head.strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in Kind)
            raise ValueError(f"unknown strategy {head!r}; expected one of {choices}") from None
        kwargs = {}
        for item in filter(None, (s.strip() for s in tail.split(","))):
            key, eq, value = item.partition("=")
            key = key.strip().replace("-", "_")
            if not eq or key not in _FIELDS[kind]:
                raise ValueError(f"bad parameter {item!r} for strategy {kind.value}")
            value = value.strip()
            if key == "max_iter" and value.lower() in ("inf", "infinity"):
                kwargs[key] = math.inf
            else:
                kwargs[key] = int(value)
        return cls(kind=kind, **kwargs)


@dataclass(frozen=True)
class CompressionPair:
    left: object
    right: object


class CountGaussSketch:
    """
    CountGauss compressor ``Omega @ S`` (left) or ``S.T @ Omega.T`` (right).

    ``S`` is a CountSketch with one signed nonzero per input coordinate and
    ``Omega`` a (p+nu, p+mu) Gaussian matrix. The sketch ``S @ X`` is formed
    by bucket accumulation in a single pass over the rows of X.
    """

    __array_ufunc__ = None  # make ndarray @ sketch dispatch to __rmatmul__

    def __init__(self, omega, bucket, sign, side="left"):
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        self.omega = omega
        self.bucket = np.asarray(bucket)
        self.sign = np.asarray(sign, dtype=np.float64)
        self.side = side

    @property
    def in_dim(self):
        return self.bucket.shape[0]

    @property
    def shape(self):
        k = self.omega.shape[0]
        return (k, self.in_dim) if self.side == "left" else (self.in_dim, k)

    def sketch_rows(self, x):
        """``S @ x`` for x of shape (in_dim, cols)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.in_dim:
            raise ValueError(f"CountSketch expects {self.in_dim} rows, got shape {x.shape}")
        out = np.zeros((self.omega.shape[1], x.shape[1]))
        np.add.at(out, self.bucket, self.sign[:, None] * x)
        return out

    def __matmul__(self, x):
        if self.side != "left":
            return NotImplemented
        return self.omega @ self.sketch_rows(x)

    def __rmatmul__(self, x):
        if self.side != "right":
            return NotImplemented
        x = np.asarray(x, dtype=np.float64)
        return self.sketch_rows(x.T).T @ self.omega.T

    def dense(self):
        s = countsketch_dense(self.bucket, self.sign, self.omega.shape[1])
        left = self.omega @ s
        return left if self.side == "left" else left.T


def _check_dims(n, m, p, nu):
    if p < 1 or nu < 0:
        raise ValueError(f"need p >= 1 and nu >= 0, got p={p}, nu={nu}")
    if p + nu > min(n, m):
        raise ValueError(f"p+nu={p + nu} exceeds min(n, m)={min(n, m)}")


def gaussian_pair(src: RandomSource, n, m, p, nu) -> CompressionPair:
    """Scaled Gaussian L (p+nu, n) and R (m, p+nu) with entries N(0, 1/(p+nu))."""
    _check_dims(n, m, p, nu)
    k = p + nu
    std = 1.0 / math.sqrt(k)
    left = gaussian_matrix(src.substream(0), k, n, std)
    right = gaussian_matrix(src.substream(1), m, k, std)
    return CompressionPair(left, right)


def stream_pair(base_src: RandomSource, iteration, n, m, p, nu_i) -> CompressionPair:
    """The `iteration`-th Gaussian pair of a compression stream."""
    return gaussian_pair(base_src.substream(iteration), n, m, p, nu_i)


def rsi_left(x, p, nu, q, src: RandomSource, stabilize=True):
    """
    Structured left compressor from randomized subspace iteration.

    Returns ``L = Q.T`` where Q is an orthonormal basis for the range of
    ``(X X^T)^q X Omega``. With ``stabilize`` the basis is re-orthonormalised
    after every multiplication by X or X^T; without it the power is formed
    first and orthonormalised once (plain power iteration).
    """
    x = np.asarray(x, dtype=np.float64)
    n, m = x.shape
    if p < 1 or nu < 0 or p + nu > n:
        raise ValueError(f"rsi_left needs 1 <= p, 0 <= nu and p+nu <= n={n}; got p={p}, nu={nu}")
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    k = p + nu
    omega = gaussian_matrix(src, m, k, 1.0 / math.sqrt(k))
    if stabilize:
        basis = orthonormalize(x @ omega)
        for _ in range(q):
            basis = orthonormalize(x.T @ basis)
            basis = orthonormalize(x @ basis)
    else:
        y = x @ omega
        for _ in range(q):
            y = x @ (x.T @ y)
        basis = orthonormalize(y)
    return np.ascontiguousarray(basis.T)


def rsi_right(x, p, nu, q, src: RandomSource, stabilize=True):
    """Right counterpart of :func:`rsi_left`: ``rsi_left(X.T).T``."""
    x = np.asarray(x, dtype=np.float64)
    return np.ascontiguousarray(rsi_left(x.T, p, nu, q, src, stabilize).T)


def _countgauss(src, in_dim, n, m, p, nu, mu, side):
    if mu <= nu:
        raise ValueError(f"CountGauss needs mu > nu, got mu={mu}, nu={nu}")
    _check_dims(n, m, p, nu)
    if p + mu > in_dim:
        raise ValueError(f"p+mu={p + mu} exceeds sketched dimension {in_dim}")
    bucket, sign = countsketch_structure(src.substream(0), in_dim, p + mu)
    omega = gaussian_matrix(src.substream(1), p + nu, p + mu, 1.0 / math.sqrt(p + nu))
    return CountGaussSketch(omega, bucket, sign, side)


def countgauss_left(src: RandomSource, n, m, p, nu, mu) -> CountGaussSketch:
    return _countgauss(src, n, n, m, p, nu, mu, "left")


def countgauss_right(src: RandomSource, n, m, p, nu, mu) -> CountGaussSketch:
    return _countgauss(src, m, n, m, p, nu, mu, "right")


def build_pair(spec: CompressorSpec, x, p, src: RandomSource) -> CompressionPair:
    """The fixed (L, R) pair that a compressed NMF run uses for `spec`."""
    n, m = x.shape
    spec.validate(n, m, p)
    if spec.kind is Kind.GAUSSIAN:
        # a fixed Gaussian pair is the first draw of the stream, so a stream
        # that never refreshes reproduces it exactly
        return stream_pair(src, 1, n, m, p, spec.nu)
    if spec.kind is Kind.RSI:
        return CompressionPair(
            rsi_left(x, p, spec.nu, spec.q, src.substream(0), spec.stabilize),
            rsi_right(x, p, spec.nu, spec.q, src.substream(1), spec.stabilize),
        )
    if spec.kind is Kind.COUNTGAUSS:
        return CompressionPair(
            countgauss_left(src.substream(0), n, m, p, spec.nu, spec.mu),
            countgauss_right(src.substream(1), n, m, p, spec.nu, spec.mu),
        )
    raise ValueError(f"strategy {spec.label} has no fixed compression pair")


# -- operation counts ---------------------------------------------------------

def _counts(*values, allow_zero=()):
    for name, value in values:
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
            raise TypeError(f"{name} must be an integer, got {value!r}")
        low = 0 if name in allow_zero else 1
        if value < low:
            raise ValueError(f"{name} must be >= {low}, got {value}")


def flops_project(n, m, p, nu) -> int:
    """Operations to form ``L @ X`` (or ``X @ R``): n*m*(p+nu)."""
    _counts(("n", n), ("m", m), ("p", p), ("nu", nu), allow_zero=("nu",))
    return int(n) * int(m) * (int(p) + int(nu))


def flops_rpi(n, m, p, nu, q) -> Fraction:
    """Operations to build one RPI compressor with Householder QR.

    ``2q(p+nu)nm + 2n(p+nu)^2 - 2/3 (p+nu)^3``, evaluated exactly.
    """
    _counts(("n", n), ("m", m), ("p", p), ("nu", nu), ("q", q), allow_zero=("nu",))
    k = int(p) + int(nu)
    n, m, q = int(n), int(m), int(q)
    return 2 * q * k * n * m + 2 * n * k * k - Fraction(2, 3) * k**3


def jll_min_dim(n_points, eps) -> int:
    """Smallest integer k with k > 8 ln(n_points) / eps**2."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    return math.floor(8.0 * math.log(n_points) / eps**2) + 1
