"""
Seeded random source with addressable substreams.

Every draw is a pure function of ``(seed, stream_id, path)``. The bit
generator is Philox (counter-based), keyed through ``numpy.random.SeedSequence``
so that distinct substream paths give independent sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Substream keys used by the drivers and the bench harness.
INIT_G = 0
INIT_F = 1
COMPRESSION = 2
DATA = 3

_UINT64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomSource:
    seed: int
    stream_id: int = 0
    path: tuple = ()

    def __post_init__(self):
        for value in (self.seed, self.stream_id, *self.path):
            if not 0 <= int(value) <= _UINT64:
                raise ValueError(f"seed/stream values must fit in uint64, got {value}")

    def substream(self, key: int) -> RandomSource:
        """Child source addressed by `key`; independent of its siblings."""
        return RandomSource(self.seed, self.stream_id, self.path + (int(key),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            int(self.seed), spawn_key=(int(self.stream_id),) + tuple(self.path)
        )
        return np.random.Generator(np.random.Philox(seq))

    def uniforms(self, count: int) -> np.ndarray:
        return self.generator().random(count)


def _box_muller(u):
    # pairs (u[2k], u[2k+1]) -> two standard normals
    u1 = u[0::2]
    u2 = u[1::2]
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(u.shape[0], dtype=np.float64)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z


def standard_normals(src: RandomSource, count: int) -> np.ndarray:
    """`count` standard normals from Box-Muller on the source's uniforms."""
    padded = count + (count % 2)
    return _box_muller(src.uniforms(padded))[:count]


def gaussian_matrix(src: RandomSource, rows: int, cols: int, std_dev: float) -> np.ndarray:
    """rows x cols matrix of i.i.d. N(0, std_dev**2) entries."""
    if rows < 1 or cols < 1:
        raise ValueError(f"shape must be positive, got ({rows}, {cols})")
    if not std_dev > 0:
        raise ValueError(f"std_dev must be positive, got {std_dev}")
    z = standard_normals(src, rows * cols).reshape(rows, cols)
    return z * std_dev


def nonneg_uniform_matrix(src: RandomSource, rows: int, cols: int) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ValueError(f"shape must be positive, got ({rows}, {cols})")
    return src.uniforms(rows * cols).reshape(rows, cols)


def countsketch_structure(src: RandomSource, in_dim: int, out_dim: int):
    """
    Bucket and sign arrays of a CountSketch ``S`` of shape (out_dim, in_dim).

    ``S[bucket[j], j] = sign[j]`` and every other entry is zero, so each
    input coordinate lands in exactly one output row.
    """
    if not 1 <= out_dim <= in_dim:
        raise ValueError(f"need 1 <= out_dim <= in_dim, got out_dim={out_dim}, in_dim={in_dim}")
    gen = src.generator()
    bucket = gen.integers(0, out_dim, size=in_dim)
    sign = np.where(gen.integers(0, 2, size=in_dim) == 1, 1.0, -1.0)
    return bucket, sign


def countsketch_dense(bucket, sign, out_dim: int) -> np.ndarray:
    """Materialise the CountSketch as a dense (out_dim, in_dim) matrix."""
    in_dim = len(bucket)
    s = np.zeros((out_dim, in_dim))
    s[bucket, np.arange(in_dim)] = sign
    return s
