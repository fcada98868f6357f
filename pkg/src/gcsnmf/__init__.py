"""Compressed nonnegative matrix factorization with random projections."""

from .bench import ExperimentConfig, cost_report, run_experiment, synth_lowrank, write_outputs
from .compress import (
    CompressionPair,
    CompressorSpec,
    CountGaussSketch,
    Kind,
    countgauss_left,
    countgauss_right,
    flops_project,
    flops_rpi,
    gaussian_pair,
    jll_min_dim,
    rsi_left,
    rsi_right,
    stream_pair,
)
from .densela import as_matrix, frobenius_norm, householder_qr, matmul, spectral_norm_sq
from .nmf import NmfConfig, RreTrace, Solver, compressed_nmf, gcs_nmf, rre, run_nmf, vanilla_nmf
from .rng import RandomSource, countsketch_structure, gaussian_matrix, nonneg_uniform_matrix
from .solvers import NnlsResult, kkt_certificate, nnls_active_set, nnls_nesterov

__version__ = "0.1.0"
