"""
NMF drivers: vanilla alternating NNLS, fixed dual compression, and the
Gaussian compression stream.

Every driver alternates a G-update followed by an F-update and records
the relative reconstruction error against the full, uncompressed X after
each alternating pair. Index 0 of a trace is the error at initialisation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .compress import CompressorSpec, Kind, build_pair, stream_pair
from .densela import as_matrix
from .rng import COMPRESSION, INIT_F, INIT_G, RandomSource, nonneg_uniform_matrix
from .solvers import nnls_active_set, nnls_nesterov


class Solver(str, enum.Enum):
    ACTIVE_SET = "as"
    NESTEROV = "nenmf"


@dataclass(frozen=True)
class NmfConfig:
    p: int
    outer_iters: int = 100
    solver: Solver = Solver.ACTIVE_SET
    compressor: CompressorSpec = field(default_factory=CompressorSpec)
    seed: int = 0
    stream_id: int = 0
    as_tol: float = 1e-10
    nesterov_max_inner: int = 500
    nesterov_tol: float = 1e-6

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.outer_iters < 1:
            raise ValueError(f"outer_iters must be >= 1, got {self.outer_iters}")
        object.__setattr__(self, "solver", Solver(self.solver))

    @property
    def source(self) -> RandomSource:
        return RandomSource(self.seed, self.stream_id)


@dataclass
class RreTrace:
    values: np.ndarray
    solver: str
    strategy: str
    seed: int

    @property
    def final(self) -> float:
        return float(self.values[-1])


def rre(x, g, f):
    """Relative reconstruction error ``||X - G F||_F^2 / ||X||_F^2``."""
    x = np.asarray(x, dtype=np.float64)
    denom = float(np.sum(x * x))
    if denom == 0.0:
        raise ValueError("RRE is undefined for a zero X")
    r = x - g @ f
    return float(np.sum(r * r)) / denom


def initial_factors(n, m, p, src: RandomSource):
    """Shared uniform [0, 1) initialisation (G0, F0) for one run seed."""
    return (
        nonneg_uniform_matrix(src.substream(INIT_G), n, p),
        nonneg_uniform_matrix(src.substream(INIT_F), p, m),
    )


def _solve(cfg: NmfConfig, a, b, h0):
    if cfg.solver is Solver.ACTIVE_SET:
        return nnls_active_set(a, b, tol=cfg.as_tol).h
    return nnls_nesterov(a, b, h0, max_inner=cfg.nesterov_max_inner, tol=cfg.nesterov_tol).h


class _Alternator:
    """One G-then-F alternating update against given (possibly compressed) data.

    ``x_r``/``x_l`` are ``X @ R`` and ``L @ X``; ``left``/``right`` are
    ``None`` for the uncompressed problem.
    """

    def __init__(self, cfg, callback=None):
        self.cfg = cfg
        self.callback = callback
        self.count = 0

    def step(self, g, f, x_r, x_l, left, right):
        self.count += 1
        f_r = f if right is None else f @ right
        a, b = f_r.T, x_r.T
        # C order keeps BLAS on the same code path as ``left @ g``
        g = np.ascontiguousarray(_solve(self.cfg, a, b, g.T).T)
        if self.callback is not None:
            self.callback("G", self.count, a, b, g.T)

        g_l = g if left is None else left @ g
        f = _solve(self.cfg, g_l, x_l, f)
        if self.callback is not None:
            self.callback("F", self.count, g_l, x_l, f)
        return g, f


def _prepare(x, cfg: NmfConfig, kinds):
    x = as_matrix(x, "X")
    if np.any(x < 0.0):
        raise ValueError("X must be entrywise nonnegative")
    if cfg.compressor.kind not in kinds:
        allowed = ", ".join(k.value for k in kinds)
        raise ValueError(f"strategy {cfg.compressor.label} not handled here (expected {allowed})")
    n, m = x.shape
    cfg.compressor.validate(n, m, cfg.p)
    g, f = initial_factors(n, m, cfg.p, cfg.source)
    return x, g, f


def _trace(values, cfg):
    return RreTrace(
        values=np.asarray(values, dtype=np.float64),
        solver=cfg.solver.value,
        strategy=cfg.compressor.label,
        seed=cfg.seed,
    )


def vanilla_nmf(x, cfg: NmfConfig, callback=None):
    """
    Uncompressed alternating NNLS.

    `callback`, if given, is called after every half-update as
    ``callback(stage, iteration, A, B, H)`` with the canonical NNLS
    problem that was just solved.
    """
    x, g, f = _prepare(x, cfg, (Kind.NONE,))
    step = _Alternator(cfg, callback).step
    values = [rre(x, g, f)]
    for _ in range(cfg.outer_iters):
        g, f = step(g, f, x, x, None, None)
        values.append(rre(x, g, f))
    return g, f, _trace(values, cfg)


def compressed_nmf(x, cfg: NmfConfig, pair=None, callback=None):
    """
    Compressed NMF with one fixed (L, R) pair.

    The pair is built from ``cfg.compressor`` unless `pair` is supplied.
    G is updated from ``(X R, F R)`` and F from ``(L X, L G)``; X_L and X_R
    may contain negative entries.
    """
    kinds = (Kind.GAUSSIAN, Kind.RSI, Kind.COUNTGAUSS)
    if pair is not None:
        kinds = kinds + (Kind.NONE,)
    x, g, f = _prepare(x, cfg, kinds)
    if pair is None:
        pair = build_pair(cfg.compressor, x, cfg.p, cfg.source.substream(COMPRESSION))
    left, right = pair.left, pair.right
    x_l = left @ x
    x_r = x @ right
    step = _Alternator(cfg, callback).step
    values = [rre(x, g, f)]
    for _ in range(cfg.outer_iters):
        g, f = step(g, f, x_r, x_l, left, right)
        values.append(rre(x, g, f))
    return g, f, _trace(values, cfg)


def gcs_nmf(x, cfg: NmfConfig, callback=None):
    """
    Compressed NMF with a Gaussian compression stream.

    A fresh pair ``(L_i, R_i)`` is drawn every ``max_iter`` alternating
    updates (``i = 1, 2, ...``); ``outer_iters`` counts alternating updates,
    so the last refresh period may be cut short. ``max_iter = inf`` keeps
    the first pair for the whole run.
    """
    x, g, f = _prepare(x, cfg, (Kind.STREAM,))
    n, m = x.shape
    spec = cfg.compressor
    stream = cfg.source.substream(COMPRESSION)
    step = _Alternator(cfg, callback).step
    values = [rre(x, g, f)]
    done = 0
    i = 0
    while done < cfg.outer_iters:
        i += 1
        pair = stream_pair(stream, i, n, m, cfg.p, spec.nu_i)
        left, right = pair.left, pair.right
        x_r = x @ right
        x_l = left @ x
        period = cfg.outer_iters - done
        if not math.isinf(spec.max_iter):
            period = min(period, int(spec.max_iter))
        for _ in range(period):
            g, f = step(g, f, x_r, x_l, left, right)
            values.append(rre(x, g, f))
        done += period
    return g, f, _trace(values, cfg)


def run_nmf(x, cfg: NmfConfig, callback=None):
    """Dispatch to the driver matching ``cfg.compressor.kind``."""
    kind = cfg.compressor.kind
    if kind is Kind.NONE:
        return vanilla_nmf(x, cfg, callback)
    if kind is Kind.STREAM:
        return gcs_nmf(x, cfg, callback)
    return compressed_nmf(x, cfg, callback=callback)
