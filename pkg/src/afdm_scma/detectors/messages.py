"""Gaussian messages, extrinsic combining and LLR conversions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..scma import bit_labels, qpsk_alphabet

LLR_CLAMP = 50.0
VAR_MIN = 1e-8
VAR_MAX = 1e4


@dataclass
class GaussianMessage:
    """Per-symbol complex means with positive real variances."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=complex)
        self.variance = np.broadcast_to(np.asarray(self.variance, dtype=float), self.mean.shape).copy()
        if np.any(~np.isfinite(self.variance)) or np.any(self.variance <= 0):
            raise ValueError("variances must be positive and finite")

    @classmethod
    def uninformative(cls, shape, variance: float = 1.0) -> "GaussianMessage":
        return cls(np.zeros(shape, dtype=complex), np.full(shape, variance))

    def __len__(self):
        return self.mean.shape[-1]


def _group_mean(v: np.ndarray, groups: np.ndarray | None) -> np.ndarray:
    """Arithmetic mean of ``v`` over entries sharing a group label (last axis).

    ``groups=None`` leaves the variances per symbol.
    """
    if groups is None:
        return v
    groups = np.asarray(groups)
    out = np.empty_like(v)
    for g in np.unique(groups):
        sel = groups == g
        out[..., sel] = v[..., sel].mean(axis=-1, keepdims=True)
    return out


def extrinsic_combine(posterior: GaussianMessage, prior: GaussianMessage, damping: float = 1.0,
                      previous: GaussianMessage | None = None, groups: np.ndarray | None = None,
                      v_min: float = VAR_MIN, v_max: float = VAR_MAX):
    """Remove the prior's information from a posterior, with optional damping.

    Variances are first averaged over ``groups`` (one label per symbol, e.g.
    the owning user). The undamped extrinsic message is
    ``1/v_e = 1/v_post - 1/v_prior`` and
    ``m_e = v_e (m_post/v_post - m_prior/v_prior)``. With ``damping < 1`` it is
    blended in the precision domain with ``previous`` (the message sent last
    time): ``1/v = kappa/v_e + (1-kappa)/v_prev``. Returns the message and the
    number of clamped entries.
    """
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    vp = _group_mean(posterior.variance, groups)
    vq = _group_mean(prior.variance, groups)
    prec = 1.0 / vp - 1.0 / vq
    bad = ~(prec > 1.0 / v_max)
    prec = np.where(bad, 1.0 / v_max, prec)
    lin = posterior.mean / vp - prior.mean / vq
    if damping < 1.0 and previous is not None:
        pv = _group_mean(previous.variance, groups)
        lin = damping * lin + (1 - damping) * previous.mean / pv
        prec = damping * prec + (1 - damping) / pv
    v = 1.0 / prec
    clamped = bad | (v < v_min)
    v = np.clip(v, v_min, v_max)
    # a clamped entry carries no usable information; fall back to the posterior mean
    mean = np.where(bad, posterior.mean, v * lin)
    return GaussianMessage(mean, v), int(np.count_nonzero(clamped))


def llr_from_gaussian(message: GaussianMessage, alphabet: np.ndarray | None = None,
                      labels: np.ndarray | None = None) -> np.ndarray:
    """Exact bit LLRs ``log P(b=0)/P(b=1)`` of symbols observed as CN(m, v).

    Output has the bits of each symbol contiguous along the last axis.
    """
    alphabet = qpsk_alphabet() if alphabet is None else np.asarray(alphabet)
    labels = bit_labels(len(alphabet)) if labels is None else np.asarray(labels)
    m = message.mean[..., None]
    v = message.variance[..., None]
    metric = -np.abs(m - alphabet) ** 2 / v
    nb = labels.shape[1]
    out = np.empty(message.mean.shape + (nb,))
    for b in range(nb):
        zero = labels[:, b] == 0
        out[..., b] = logsumexp(metric[..., zero], axis=-1) - logsumexp(metric[..., ~zero], axis=-1)
    return out.reshape(message.mean.shape[:-1] + (-1,))


def llr_from_gaussian_qpsk(message: GaussianMessage) -> np.ndarray:
    """Closed-form QPSK LLRs: ``sqrt(8) Re(m)/v`` and ``sqrt(8) Im(m)/v``."""
    scale = np.sqrt(8.0) / message.variance
    out = np.stack([scale * message.mean.real, scale * message.mean.imag], axis=-1)
    return out.reshape(message.mean.shape[:-1] + (-1,))


def gaussian_from_llr(llrs: np.ndarray, alphabet: np.ndarray | None = None,
                      labels: np.ndarray | None = None, v_min: float = VAR_MIN) -> GaussianMessage:
    """Project bit LLRs onto per-symbol means and variances."""
    alphabet = qpsk_alphabet() if alphabet is None else np.asarray(alphabet)
    labels = bit_labels(len(alphabet)) if labels is None else np.asarray(labels)
    nb = labels.shape[1]
    llrs = np.clip(np.asarray(llrs, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    lb = llrs.reshape(llrs.shape[:-1] + (-1, nb))
    # log P(b) with b in {0,1}: log sigmoid(+-L)
    logp0 = -np.logaddexp(0.0, -lb)
    logp1 = -np.logaddexp(0.0, lb)
    logp = np.zeros(lb.shape[:-1] + (len(alphabet),))
    for b in range(nb):
        logp += np.where(labels[:, b] == 0, logp0[..., b:b + 1], logp1[..., b:b + 1])
    p = np.exp(logp)
    mean = p @ alphabet
    var = p @ (np.abs(alphabet) ** 2) - np.abs(mean) ** 2
    return GaussianMessage(mean, np.maximum(var, v_min))


def gaussian_from_llr_qpsk(llrs: np.ndarray, v_min: float = VAR_MIN) -> GaussianMessage:
    """Closed-form QPSK projection using ``tanh(L/2)`` on both rails."""
    llrs = np.clip(np.asarray(llrs, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    lb = llrs.reshape(llrs.shape[:-1] + (-1, 2))
    t = np.tanh(lb / 2)
    mean = (t[..., 0] + 1j * t[..., 1]) / np.sqrt(2)
    return GaussianMessage(mean, np.maximum(1.0 - np.abs(mean) ** 2, v_min))
