"""Analytical tools: pairwise error probability, union bound, complexity
ratio and state evolution of the iterative receiver."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erfc

from .afdm import AfdmParams
from .channel import ChannelRealization, path_effective_matrices
from .coding.ldpc import decode, encode
from .detectors.messages import GaussianMessage, gaussian_from_llr_qpsk, llr_from_gaussian_qpsk
from .detectors.oamp import qpsk_modulate_bits
from .scma import bit_labels, user_columns


# ---------------------------------------------------------------------------
# Pairwise error probability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiversityReport:
    rank: int
    eigenvalues: np.ndarray
    coding_gain: float


def phi_delta(delta: np.ndarray, path_structure: ChannelRealization, params: AfdmParams,
              k_nu: int | None = None) -> np.ndarray:
    """N x P matrix whose column p is the unit-gain path matrix applied to ``delta``."""
    delta = np.asarray(delta, dtype=complex)
    if not np.any(delta):
        raise ValueError("delta must be nonzero")
    mats = path_effective_matrices(path_structure, params, k_nu)
    return np.stack([h @ delta for h in mats], axis=1)


def nonzero_eigenvalues(lams: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
    lams = np.asarray(lams, dtype=float)
    if lams.size == 0 or lams.max() <= 0:
        return np.zeros(0)
    return lams[lams > rel_tol * lams.max()]


def diversity_report(phi: np.ndarray, gain_variance: float | None = None) -> DiversityReport:
    """Rank and nonzero eigenvalues of ``var * Phi^H Phi`` (var defaults to 1/P)."""
    var = 1.0 / phi.shape[1] if gain_variance is None else gain_variance
    lams = np.linalg.eigvalsh(var * phi.conj().T @ phi)
    nz = nonzero_eigenvalues(lams)
    return DiversityReport(len(nz), nz, float(np.prod(nz)) if len(nz) else 0.0)


def pep_from_eigenvalues(lams, n0) -> np.ndarray:
    """Pairwise error probability from the exponential Q-function approximation.

    ``lams`` has shape (..., R); zeros contribute a factor of one. Returns an
    array broadcast over ``n0``.
    """
    lams = np.asarray(lams, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    l = lams[..., None, :] if n0.ndim else lams
    nn = n0[..., None] if n0.ndim else n0
    a = np.prod(1.0 / (1.0 + l / (4 * nn)), axis=-1)
    b = np.prod(1.0 / (1.0 + l / (3 * nn)), axis=-1)
    return a / 12 + b / 4


def pep_asymptote(lams, n0) -> np.ndarray:
    """High-SNR form ``n0^-R (4^R/12 + 3^R/4) / prod(lambda)`` over nonzero eigenvalues."""
    nz = nonzero_eigenvalues(lams)
    r = len(nz)
    if r == 0:
        return np.full(np.shape(n0), 1.0 / 3)
    return (4.0 ** r / 12 + 3.0 ** r / 4) / np.prod(nz) * np.asarray(n0, dtype=float) ** r


def pep(delta: np.ndarray, path_structure: ChannelRealization, params: AfdmParams, n0,
        gain_variance: float | None = None, k_nu: int | None = None):
    """(approximate PEP, high-SNR asymptote) for a codeword difference."""
    rep = diversity_report(phi_delta(delta, path_structure, params, k_nu), gain_variance)
    return pep_from_eigenvalues(rep.eigenvalues, n0), pep_asymptote(rep.eigenvalues, n0)


def exact_rayleigh_pep(lams, n0, draws: int = 100_000, rng=None) -> float:
    """Monte Carlo ``E[Q(sqrt(h^H L h / (2 n0)))]`` with ``h ~ CN(0, I)``."""
    rng = np.random.default_rng(rng)
    lams = np.asarray(lams, dtype=float)
    h = (rng.standard_normal((draws, len(lams))) + 1j * rng.standard_normal((draws, len(lams)))) / np.sqrt(2)
    d2 = np.sum(lams * np.abs(h) ** 2, axis=1)
    x = np.sqrt(d2 / (2 * n0))
    return float(np.mean(0.5 * erfc(x / np.sqrt(2))))


# ---------------------------------------------------------------------------
# Union bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PepSystem:
    """Linear map from a symbol-difference vector to the columns of Omega.

    ``column_maps[c]`` is an N x V matrix so that column c of Omega(delta)
    equals ``column_maps[c] @ delta``; ``variances[c]`` is the variance of
    the Rayleigh gain multiplying that column.
    """

    column_maps: np.ndarray
    variances: np.ndarray
    alphabet: np.ndarray

    @property
    def n_vars(self) -> int:
        return self.column_maps.shape[2]


def uplink_pep_system(structures: Sequence[ChannelRealization], params: AfdmParams,
                      z_sym: np.ndarray, alphabet: np.ndarray,
                      variances: Sequence[np.ndarray] | None = None,
                      k_nu: int | None = None) -> PepSystem:
    """Omega = [Phi_1(D_1) | ... | Phi_J(D_J)] with per-user path structures."""
    j = len(structures)
    n_groups = z_sym.shape[1] // j
    maps, var = [], []
    for user, st in enumerate(structures):
        cols = user_columns(user, n_groups, j)
        mats = path_effective_matrices(st, params, k_nu)
        for p, h in enumerate(mats):
            m = np.zeros((z_sym.shape[0], z_sym.shape[1]), dtype=complex)
            m[:, cols] = h @ z_sym[:, cols]
            maps.append(m)
            var.append(1.0 / len(mats) if variances is None else variances[user][p])
    return PepSystem(np.array(maps), np.array(var), np.asarray(alphabet, dtype=complex))


def downlink_pep_system(structure: ChannelRealization, params: AfdmParams, z_sym: np.ndarray,
                        alphabet: np.ndarray, variances: np.ndarray | None = None,
                        k_nu: int | None = None) -> PepSystem:
    mats = path_effective_matrices(structure, params, k_nu)
    var = np.full(len(mats), 1.0 / len(mats)) if variances is None else np.asarray(variances)
    return PepSystem(np.array([h @ z_sym for h in mats]), var, np.asarray(alphabet, dtype=complex))


def _difference_tables(alphabet: np.ndarray):
    """Distinct symbol differences with pair counts and summed label distances."""
    m = len(alphabet)
    labels = bit_labels(m)
    diffs = {}
    for a, b in itertools.product(range(m), repeat=2):
        d = alphabet[a] - alphabet[b]
        key = (round(d.real, 9), round(d.imag, 9))
        cnt, ham, val = diffs.get(key, (0, 0, d))
        diffs[key] = (cnt + 1, ham + int(np.sum(labels[a] != labels[b])), val)
    zero = (0.0, 0.0)
    keys = [zero] + [k for k in diffs if k != zero]
    vals = np.array([diffs[k][2] for k in keys])
    counts = np.array([diffs[k][0] for k in keys], dtype=float)
    hams = np.array([diffs[k][1] for k in keys], dtype=float)
    return vals, counts, hams


def union_bound_ber(system: PepSystem, n0, cap: int = 2 ** 20, chunk: int = 20_000) -> np.ndarray:
    """Union bound on the bit error rate over all hypothesis pairs.

    Each pair (s, s') contributes its label Hamming distance times the PEP of
    ``s - s'``; the sum is divided by ``M^V * V * log2(M)``. Pairs sharing a
    difference vector are aggregated, so the cost is ``|D|^V`` eigenvalue
    problems with D the set of distinct symbol differences.
    """
    n0 = np.atleast_1d(np.asarray(n0, dtype=float))
    vals, counts, hams = _difference_tables(system.alphabet)
    v = system.n_vars
    n_diff = len(vals)
    total = n_diff ** v
    if total > cap:
        raise ValueError(f"{n_diff}^{v} difference vectors exceed the cap {cap}")
    m = len(system.alphabet)
    nbits = int(round(np.log2(m)))
    scale = np.sqrt(system.variances)[None, None, :]
    acc = np.zeros(len(n0))
    for start in range(1, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = (idx[:, None] // n_diff ** np.arange(v - 1, -1, -1)[None, :]) % n_diff
        delta = vals[digits]                                  # (C, V)
        c = counts[digits]
        # pairs with this difference and their summed Hamming distance
        pair_count = np.prod(c, axis=1)
        weight = pair_count * np.sum(hams[digits] / c, axis=1)
        omega = np.einsum("knv,cv->cnk", system.column_maps, delta) * scale
        gram = np.conj(np.swapaxes(omega, 1, 2)) @ omega
        lams = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
        acc += weight @ pep_from_eigenvalues(lams, n0)
    return acc / (m ** v * v * nbits)


# ---------------------------------------------------------------------------
# Complexity
# ---------------------------------------------------------------------------

def crr(n: int, i_t: int, m: int, d_f: int) -> float:
    """``1 - N^3 / (I_t N M^d_f d_f + N^3)``."""
    denom = i_t * n * m ** d_f * d_f + n ** 3
    return 1.0 - n ** 3 / denom


# ---------------------------------------------------------------------------
# State evolution
# ---------------------------------------------------------------------------

@dataclass
class SeTrace:
    """Per-iteration SE quantities.

    ``tau``: LE extrinsic variance; ``phi``: decoder-output MSE; ``eta``:
    variance of the message returned to the LE.
    """

    tau: list[float] = field(default_factory=list)
    phi: list[float] = field(default_factory=list)
    eta: list[float] = field(default_factory=list)
    clamped: bool = False

    def __len__(self):
        return len(self.tau)


def _lmmse_trace(g: np.ndarray, n0: float, eta: float) -> float:
    """``mean_b tr(G_b^H (eta G_b G_b^H + n0 I)^-1 G_b)``."""
    n = g.shape[1]
    cov = eta * g @ np.conj(np.swapaxes(g, 1, 2)) + n0 * np.eye(n)[None]
    sol = np.linalg.solve(cov, g)
    return float(np.real(np.sum(np.conj(g) * sol, axis=(1, 2))).mean())


def lmmse_mse(effective_matrices: np.ndarray, n0: float, prior_var: float) -> float:
    """Average per-symbol LMMSE error for a scalar prior variance.

    ``eta - eta^2 / V * mean_b tr(G_b^H (eta G_b G_b^H + n0 I)^-1 G_b)``.
    """
    g = np.asarray(effective_matrices, dtype=complex)
    if g.ndim == 2:
        g = g[None]
    eta = float(prior_var)
    if eta <= 0:
        return 0.0
    return float(eta - eta ** 2 / g.shape[2] * _lmmse_trace(g, n0, eta))


def le_extrinsic_variance(effective_matrices: np.ndarray, n0: float, prior_var: float) -> float:
    """``(1/gamma - 1/eta)^-1`` for the LMMSE error ``gamma`` at prior variance ``eta``.

    Evaluated as ``V gamma / (eta t)`` with t the averaged trace, which stays
    accurate when ``eta`` is tiny and ``gamma`` is almost equal to it.
    """
    g = np.asarray(effective_matrices, dtype=complex)
    if g.ndim == 2:
        g = g[None]
    eta = float(prior_var)
    v = g.shape[2]
    if eta <= 0:
        return v / _lmmse_trace(g, n0, 0.0)
    t = _lmmse_trace(g, n0, eta)
    if t <= 0:
        return np.inf
    gamma = eta - eta ** 2 / v * t
    return v * gamma / (eta * t)


def _orthogonalize(post: float, prior: float) -> float:
    """``(1/post - 1/prior)^-1`` with the limits handled."""
    if post <= 0:
        return 0.0
    if prior <= post:
        return np.inf
    return 1.0 / (1.0 / post - 1.0 / prior)


@dataclass(frozen=True)
class NleTable:
    """Decoder-output MSE as a function of the AWGN variance at its input."""

    taus: np.ndarray
    mses: np.ndarray

    def __call__(self, tau: float):
        """Log-log interpolated MSE and a flag set when ``tau`` was clamped."""
        lo, hi = self.taus[0], self.taus[-1]
        clamped = not lo <= tau <= hi
        t = float(np.clip(tau, lo, hi))
        floor = 1e-300
        val = np.exp(np.interp(np.log(t), np.log(self.taus), np.log(np.maximum(self.mses, floor))))
        return (0.0 if val <= 1e-299 else float(val)), clamped


def build_nle_table(code, taus: np.ndarray | None = None, frames: int = 20,
                    decoder_iterations: int = 8, seed: int = 0) -> NleTable:
    """Monte Carlo decoder transfer curve over QPSK + AWGN.

    Uses 40 log-spaced noise levels by default; each level decodes ``frames``
    random codewords and records the MSE of the a-posteriori soft symbols.
    """
    taus = np.logspace(-2, 1, 40) if taus is None else np.asarray(taus, dtype=float)
    rng = np.random.default_rng(seed)
    mses = np.empty(len(taus))
    for i, tau in enumerate(taus):
        u = rng.integers(0, 2, (frames, code.info_bits))
        c = encode(u, code)
        s = qpsk_modulate_bits(c)
        r = s + np.sqrt(tau / 2) * (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape))
        llr = llr_from_gaussian_qpsk(GaussianMessage(r, np.full(r.shape, tau)))
        res = decode(llr, code, decoder_iterations)
        est = gaussian_from_llr_qpsk(res.aposteriori)
        mses[i] = np.mean(np.abs(est.mean - s) ** 2)
    return NleTable(taus, mses)


def state_evolution(effective_matrices: np.ndarray, n0: float, nle_table, iterations: int,
                    prior_var: float = 1.0) -> SeTrace:
    """Scalar recursion for the LE/decoder loop.

    ``nle_table`` is an :class:`NleTable` or any callable returning
    ``(mse, clamped)`` for an input variance.
    """
    trace = SeTrace()
    eta = prior_var
    for _ in range(iterations):
        tau = le_extrinsic_variance(effective_matrices, n0, eta)
        phi, clamped = nle_table(tau)
        trace.clamped |= clamped
        eta = _orthogonalize(phi, tau) if np.isfinite(tau) else phi
        trace.tau.append(float(tau))
        trace.phi.append(float(phi))
        trace.eta.append(float(eta))
    return trace

