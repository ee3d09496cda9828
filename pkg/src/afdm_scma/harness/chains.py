"""End-to-end transmit/channel/receive chains for one batch of trials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import (ChannelRealization, effective_matrix_closed_form,
                       sample_realization)
from ..coding.interleaver import interleave
from ..coding.ldpc import encode
from ..detectors.linear import lmmse_estimate, two_stage_downlink
from ..detectors.messages import GaussianMessage
from ..detectors.mpa import SparseFactorGraph, mpa_detect
from ..detectors.oamp import frame_to_blocks, oamp_receive, qpsk_modulate_bits
from ..scma import indices_to_bits, uplink_effective_matrix
from .config import System


@dataclass
class BatchCounts:
    bit_errors: int = 0
    bits: int = 0
    frame_errors: int = 0
    frames: int = 0

    def __iadd__(self, other: "BatchCounts"):
        self.bit_errors += other.bit_errors
        self.bits += other.bits
        self.frame_errors += other.frame_errors
        self.frames += other.frames
        return self


def _noise(rng, shape, n0):
    return np.sqrt(n0 / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _needs_truncation(realizations: list[ChannelRealization]) -> bool:
    return any(np.any(r.dopplers != np.round(r.dopplers)) for r in realizations)


def draw_effective_matrices(system: System, rng, truncate: bool = True):
    """Sample one block's channel(s) and return (true G, receiver G).

    The receiver matrix drops entries outside the +-k_nu band when some
    Doppler is fractional; otherwise both are identical.
    """
    p = system.params
    n_real = system.scma.j if system.config.direction == "uplink" else 1
    reals = [sample_realization(system.profile, rng, p) for _ in range(n_real)]
    k_nu = system.config.channel.k_nu if truncate and _needs_truncation(reals) else None
    h_true = np.stack([effective_matrix_closed_form(r, p) for r in reals])
    h_rx = h_true if k_nu is None else np.stack([effective_matrix_closed_form(r, p, k_nu) for r in reals])
    if system.config.direction == "uplink":
        g_true = uplink_effective_matrix(h_true, system.z_sym, system.scma.j)
        g_rx = g_true if k_nu is None else uplink_effective_matrix(h_rx, system.z_sym, system.scma.j)
    else:
        g_true = h_true[0] @ system.z_sym
        g_rx = g_true if k_nu is None else h_rx[0] @ system.z_sym
    return g_true, g_rx, h_true[0], h_rx[0]


def run_uncoded_batch(system: System, n0: float, trials: int, rng) -> BatchCounts:
    cfg = system.config
    alphabet = system.codebook.alphabet
    m = len(alphabet)
    v = system.n_vars
    # only MPA needs a sparse (band-truncated) receiver matrix
    truncate = cfg.receiver == "mpa"
    g_true = np.empty((trials, system.params.n, v), dtype=complex)
    g_rx = np.empty_like(g_true)
    h_rx = np.empty((trials, system.params.n, system.params.n), dtype=complex)
    for t in range(trials):
        g_true[t], g_rx[t], _, h_rx[t] = draw_effective_matrices(system, rng, truncate)
    idx = rng.integers(0, m, (trials, v))
    s = alphabet[idx]
    y = np.einsum("tnv,tv->tn", g_true, s) + _noise(rng, (trials, system.params.n), n0)

    if cfg.receiver == "mpa":
        est = np.empty((trials, v), dtype=int)
        support = np.abs(g_rx) > 1e-10 * np.abs(g_rx).max(axis=(1, 2), keepdims=True)
        keys = {}
        for t in range(trials):
            keys.setdefault(support[t].tobytes(), []).append(t)
        for rows in keys.values():
            rows = np.array(rows)
            graph = SparseFactorGraph(support[rows[0]], m)
            post = mpa_detect(y[rows], g_rx[rows], alphabet, n0, cfg.mpa_iterations, graph=graph)
            est[rows] = np.argmax(post, axis=-1)
    elif cfg.receiver == "two_stage":
        est = np.empty((trials, v), dtype=int)
        for t in range(trials):
            post = two_stage_downlink(y[t], h_rx[t], system.codebook, system.z_sym, n0,
                                      cfg.mpa_iterations)
            est[t] = np.argmax(post[0], axis=-1)
    else:
        est = np.empty((trials, v), dtype=int)
        prior = GaussianMessage.uninformative(v)
        for t in range(trials):
            post = lmmse_estimate(y[t], g_rx[t], prior, n0)
            est[t] = np.argmin(np.abs(post.mean[:, None] - alphabet[None, :]), axis=1)
    err = indices_to_bits(est, m) != indices_to_bits(idx, m)
    return BatchCounts(int(err.sum()), int(err.size), int(np.any(err, axis=1).sum()), trials)


def simulate_coded_frame(system: System, n0: float, rng, record_trace: bool = False):
    """One coded frame per user through the OAMP receiver.

    Returns (counts, oamp result). Each AFDM block of the frame sees an
    independent channel draw.
    """
    code = system.code
    j = system.scma.j
    q = system.n_groups
    bits_per_block = q * 2
    if code.frame_bits % bits_per_block:
        raise ValueError("code frame length must be a whole number of AFDM blocks")
    n_blocks = code.frame_bits // bits_per_block
    info = rng.integers(0, 2, (j, code.info_bits))
    coded = encode(info, code)
    inter = np.stack([interleave(coded[u], system.interleavers[u]) for u in range(j)])
    s = frame_to_blocks(qpsk_modulate_bits(inter), q)
    g_true = np.empty((n_blocks, system.params.n, system.n_vars), dtype=complex)
    g_rx = np.empty_like(g_true)
    for b in range(n_blocks):
        g_true[b], g_rx[b], _, _ = draw_effective_matrices(system, rng, truncate=False)
    y = np.einsum("bnv,bv->bn", g_true, s) + _noise(rng, (n_blocks, system.params.n), n0)
    res = oamp_receive(y, g_rx, code, system.oamp, n0, system.interleavers,
                       s if record_trace else None)
    err = res.info_bits != info
    counts = BatchCounts(int(err.sum()), int(err.size), int(np.any(err, axis=1).sum()), j)
    return counts, res


def run_coded_batch(system: System, n0: float, trials: int, rng) -> BatchCounts:
    total = BatchCounts()
    for _ in range(trials):
        counts, _ = simulate_coded_frame(system, n0, rng)
        total += counts
    return total


def run_batch(system: System, n0: float, trials: int, rng) -> BatchCounts:
    if system.config.receiver == "oamp":
        return run_coded_batch(system, n0, trials, rng)
    return run_uncoded_batch(system, n0, trials, rng)
