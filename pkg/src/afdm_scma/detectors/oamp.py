"""OAMP-style iterative receiver: LMMSE estimator <-> per-user LDPC decoders.

The linear estimator (LE) and the decoder-side estimator (NLE) exchange
Gaussian messages; each side removes the information it received before
passing its belief on, so input and output errors stay uncorrelated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..coding.interleaver import Interleaver, deinterleave, interleave
from ..coding.ldpc import LdpcCode, decode, extract_info
from .linear import lmmse_estimate
from .messages import (GaussianMessage, extrinsic_combine, gaussian_from_llr_qpsk,
                       llr_from_gaussian_qpsk)


@dataclass(frozen=True)
class OampConfig:
    outer_iterations: int = 10
    damping: float = 0.25
    inner_decoder_iterations: int = 8

    def __post_init__(self):
        if self.outer_iterations < 1 or self.inner_decoder_iterations < 1:
            raise ValueError("iteration counts must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class IterationStats:
    """Per-outer-iteration diagnostics.

    ``le_mse``/``le_var``: empirical error and reported variance of the LE
    extrinsic output; ``dec_mse``: error of the decoder a-posteriori symbol
    estimate; ``nle_var``: variance of the message fed back to the LE.
    MSE fields are NaN when the transmitted symbols are unknown.
    """

    iteration: int
    le_mse: float
    le_var: float
    dec_mse: float
    nle_var: float
    clamped: int


@dataclass
class OampResult:
    info_bits: np.ndarray        # (J, k)
    coded_bits: np.ndarray       # (J, n), de-interleaved decoder decisions
    converged: np.ndarray        # (J,)
    trace: list[IterationStats] = field(default_factory=list)
    clamped: int = 0


def frame_to_blocks(symbols: np.ndarray, n_groups: int) -> np.ndarray:
    """(J, S) per-user symbol streams -> (B, Q*J) block vectors.

    Symbol ``i`` of user j goes to block ``i // Q``, group ``i % Q``; the
    block vector is ordered group-major (``q * J + j``).
    """
    j, s = symbols.shape
    if s % n_groups:
        raise ValueError(f"{s} symbols per user do not fill whole blocks of {n_groups} groups")
    b = s // n_groups
    return symbols.reshape(j, b, n_groups).transpose(1, 2, 0).reshape(b, n_groups * j)


def blocks_to_frame(blocks: np.ndarray, n_users: int) -> np.ndarray:
    b, v = blocks.shape
    q = v // n_users
    return blocks.reshape(b, q, n_users).transpose(2, 0, 1).reshape(n_users, b * q)


def qpsk_modulate_bits(bits: np.ndarray) -> np.ndarray:
    """Bit pairs (MSB first) to Gray QPSK: bit 0 -> +1/sqrt(2) on its rail."""
    b = np.asarray(bits).reshape(np.shape(bits)[:-1] + (-1, 2))
    return ((1 - 2 * b[..., 0]) + 1j * (1 - 2 * b[..., 1])) / np.sqrt(2)


def oamp_receive(received: np.ndarray, effective_matrices: np.ndarray, code: LdpcCode,
                 config: OampConfig, n0: float, interleavers: list[Interleaver],
                 true_symbols: np.ndarray | None = None) -> OampResult:
    """Iterative detection and decoding of one coded frame per user.

    Args:
        received: (B, N) DAFT-domain observations, one row per AFDM block.
        effective_matrices: (B, N, Q*J) per-block effective matrices.
        code: LDPC code shared by the users (frame length n = 2 * B * Q).
        config: iteration counts and damping.
        n0: noise variance.
        interleavers: one per user.
        true_symbols: optional (B, Q*J) transmitted symbols for MSE tracing.

    Returns:
        :class:`OampResult` with hard decisions from the final decoder pass.
    """
    y = np.asarray(received, dtype=complex)
    g = np.asarray(effective_matrices, dtype=complex)
    n_blocks, _, n_vars = g.shape
    n_users = len(interleavers)
    n_groups = n_vars // n_users
    if n_blocks * n_groups * 2 != code.frame_bits:
        raise ValueError("blocks x groups x 2 bits must equal the code frame length")
    labels = (np.arange(n_blocks)[:, None] * n_users + np.arange(n_vars)[None, :] % n_users).ravel()

    prior = GaussianMessage.uninformative(n_blocks * n_vars)
    prev_le = prev_nle = None
    trace = []
    clamped_total = 0
    result = None
    for it in range(config.outer_iterations):
        pm = prior.mean.reshape(n_blocks, n_vars)
        pv = prior.variance.reshape(n_blocks, n_vars)
        means = np.empty((n_blocks, n_vars), dtype=complex)
        variances = np.empty((n_blocks, n_vars))
        for b in range(n_blocks):
            post_b = lmmse_estimate(y[b], g[b], GaussianMessage(pm[b], pv[b]), n0)
            means[b], variances[b] = post_b.mean, post_b.variance
        post = GaussianMessage(means.ravel(), variances.ravel())
        le_out, c1 = extrinsic_combine(post, prior, config.damping, prev_le, labels)
        prev_le = le_out

        le_frame = GaussianMessage(blocks_to_frame(le_out.mean.reshape(n_blocks, n_vars), n_users),
                                   blocks_to_frame(le_out.variance.reshape(n_blocks, n_vars), n_users))
        llr = llr_from_gaussian_qpsk(le_frame)
        llr = np.stack([deinterleave(llr[j], interleavers[j]) for j in range(n_users)])
        result = decode(llr, code, config.inner_decoder_iterations)
        app = np.stack([interleave(result.aposteriori[j], interleavers[j]) for j in range(n_users)])
        dec = gaussian_from_llr_qpsk(app)
        dec_blocks = GaussianMessage(frame_to_blocks(dec.mean, n_groups).ravel(),
                                     frame_to_blocks(dec.variance, n_groups).ravel())
        nle_out, c2 = extrinsic_combine(dec_blocks, le_out, config.damping, prev_nle, labels)
        prev_nle = nle_out
        prior = nle_out
        clamped_total += c1 + c2

        if true_symbols is not None:
            s = np.asarray(true_symbols).ravel()
            le_mse = float(np.mean(np.abs(le_out.mean - s) ** 2))
            dec_mse = float(np.mean(np.abs(dec_blocks.mean - s) ** 2))
        else:
            le_mse = dec_mse = float("nan")
        trace.append(IterationStats(it + 1, le_mse, float(le_out.variance.mean()), dec_mse,
                                    float(nle_out.variance.mean()), c1 + c2))

    info = extract_info(result.hard_bits, code)
    return OampResult(info, result.hard_bits, np.atleast_1d(result.converged), trace, clamped_total)
