"""Linear MMSE estimators and the two-stage downlink receiver."""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve

from ..scma import Codebook, bit_labels
from .messages import GaussianMessage
from .mpa import mpa_detect


def lmmse_estimate(received: np.ndarray, effective_matrix: np.ndarray, prior: GaussianMessage,
                   n0: float) -> GaussianMessage:
    """Posterior of ``s`` from ``r = G s + CN(0, n0 I)`` with a diagonal Gaussian prior.

    Uses the observation-space form: ``W = V G^H (n0 I + G V G^H)^-1``,
    ``m = m0 + W (r - G m0)``, ``v = diag(V - W G V)``.
    """
    g = np.asarray(effective_matrix, dtype=complex)
    v0 = np.asarray(prior.variance, dtype=float)
    if np.any(v0 <= 0):
        raise ValueError("prior variances must be positive")
    r = np.asarray(received, dtype=complex)
    gv = g * v0[None, :]
    cov = n0 * np.eye(g.shape[0]) + gv @ g.conj().T
    resid = r - g @ prior.mean
    try:
        fac = cho_factor(cov)
        mean = prior.mean + gv.conj().T @ cho_solve(fac, resid)
        # diag(V G^H C^-1 G V) = sum_n conj(GV)[n,k] (C^-1 GV)[n,k]
        var = v0 - np.real(np.sum(gv.conj() * cho_solve(fac, gv), axis=0))
    except LinAlgError as exc:
        raise LinAlgError("regularised covariance is singular") from exc
    return GaussianMessage(mean, np.maximum(var, 1e-12))


def lmmse_estimate_direct(received: np.ndarray, effective_matrix: np.ndarray,
                          prior: GaussianMessage, n0: float) -> GaussianMessage:
    """Same posterior computed in symbol space: ``(G^H G / n0 + V^-1)^-1``."""
    g = np.asarray(effective_matrix, dtype=complex)
    v0 = np.asarray(prior.variance, dtype=float)
    if np.any(v0 <= 0):
        raise ValueError("prior variances must be positive")
    prec = g.conj().T @ g / n0 + np.diag(1.0 / v0)
    cov = np.linalg.inv(prec)
    mean = cov @ (g.conj().T @ np.asarray(received) / n0 + prior.mean / v0)
    return GaussianMessage(mean, np.real(np.diag(cov)))


def lmmse_filter(h: np.ndarray, n0: float) -> np.ndarray:
    """``W = H^H (H H^H + n0 I)^-1`` for a unit-variance, zero-mean input."""
    h = np.asarray(h, dtype=complex)
    cov = h @ h.conj().T + n0 * np.eye(h.shape[0])
    if n0 == 0 and np.linalg.matrix_rank(cov) < cov.shape[0]:
        raise LinAlgError("H H^H is singular and no noise regularisation was given")
    return solve(cov, h, assume_a="her").conj().T


def two_stage_downlink(received: np.ndarray, h_sym: np.ndarray, codebook: Codebook,
                       z_sym: np.ndarray, n0: float, mpa_iterations: int = 5,
                       resource_power: np.ndarray | None = None) -> np.ndarray:
    """Linear equalisation of the N x N channel followed by SCMA MPA.

    Stage one forms ``w_hat = W y``. Entry k is modelled as
    ``mu_k w_k + e_k`` with ``mu_k = [W H]_kk`` and the exact residual power of
    ``e_k`` (interference plus filtered noise). Stage two runs MPA on
    ``diag(mu) Z_sym`` with those per-entry noise levels.

    Returns (T, V, M) posteriors over each base symbol (V = N J / K).
    """
    h = np.asarray(h_sym, dtype=complex)
    y = np.atleast_2d(received)
    w = lmmse_filter(h, n0)
    w_hat = y @ w.T
    b = w @ h
    mu = np.real(np.diag(b))
    if resource_power is None:
        resource_power = np.sum(np.abs(z_sym) ** 2, axis=1)
    leak = np.abs(b) ** 2 * resource_power[None, :]
    interf = leak.sum(axis=1) - np.diag(leak)
    noise_var = interf + n0 * np.sum(np.abs(w) ** 2, axis=1)
    noise_var = np.maximum(noise_var, 1e-12)
    g = mu[:, None] * z_sym
    post = mpa_detect(w_hat, g, codebook.alphabet, noise_var[None, :], mpa_iterations)
    return post


def hard_bits_from_posteriors(post: np.ndarray) -> np.ndarray:
    """Map (..., V, M) symbol posteriors to hard bits, MSB first."""
    m = post.shape[-1]
    bits = bit_labels(m)[np.argmax(post, axis=-1)]
    return bits.reshape(bits.shape[:-2] + (-1,))
