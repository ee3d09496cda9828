"""Sum-product message passing over a sparse linear observation model.

Model: ``y[n] = sum_v G[n, v] * alphabet[s_v] + noise``, noise CN(0, n0[n]).
Each row of ``G`` is a factor node, each column an M-ary variable node.
Messages are kept as normalised log-probabilities and factor updates
enumerate all ``M**deg`` joint hypotheses of a row.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


class ComplexityError(ValueError):
    """A factor node has too many neighbours to enumerate."""


@dataclass
class _FactorGroup:
    rows: np.ndarray        # (F,) row indices
    cols: np.ndarray        # (F, d) neighbouring variables
    edges: np.ndarray       # (F, d) global edge ids
    combos: np.ndarray      # (M**d, d) hypothesis table


class SparseFactorGraph:
    """Row/column neighbourhoods of a sparse matrix support."""

    def __init__(self, support: np.ndarray, m: int, max_hypotheses: int = 2 ** 16):
        support = np.asarray(support, dtype=bool)
        self.n_rows, self.n_vars = support.shape
        self.m = m
        neigh = [np.flatnonzero(row) for row in support]
        worst = max(len(c) for c in neigh)
        if worst == 0:
            raise ValueError("the support is empty")
        if m ** worst > max_hypotheses:
            raise ComplexityError(
                f"row degree {worst} needs {m}^{worst} hypotheses (cap {max_hypotheses})"
            )
        self.degrees = np.array([len(c) for c in neigh])
        edge_var = []
        self.groups: list[_FactorGroup] = []
        next_edge = 0
        # rows without neighbours carry no information and are skipped
        for d in sorted(set(self.degrees.tolist()) - {0}):
            rows = np.flatnonzero(self.degrees == d)
            cols = np.array([neigh[r] for r in rows])
            edges = next_edge + np.arange(len(rows) * d).reshape(len(rows), d)
            next_edge += len(rows) * d
            edge_var.append(cols.ravel())
            combos = np.array(list(itertools.product(range(m), repeat=d)), dtype=int)
            self.groups.append(_FactorGroup(rows, cols, edges, combos))
        self.edge_var = np.concatenate(edge_var)
        self.n_edges = next_edge

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())


def _lse(x: np.ndarray, axis) -> np.ndarray:
    """Log-sum-exp over ``axis``; inputs are finite log-probabilities."""
    mx = np.max(x, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(x - mx), axis=axis, keepdims=True)) + mx
    return np.squeeze(out, axis=axis)


def _normalize(logp: np.ndarray) -> np.ndarray:
    return logp - _lse(logp, -1)[..., None]


def mpa_detect(received: np.ndarray, g_all: np.ndarray, alphabet: np.ndarray, n0,
               iterations: int = 10, graph: SparseFactorGraph | None = None,
               prior: np.ndarray | None = None, tol: float = 1e-10,
               max_hypotheses: int = 2 ** 16, return_log: bool = False) -> np.ndarray:
    """Per-variable posterior probabilities over the alphabet.

    Args:
        received: (N,) or (T, N) observations; T trials are processed together.
        g_all: (N, V) or (T, N, V) effective matrix. Trials must share a support.
        alphabet: (M,) complex symbol values taken by every variable.
        n0: noise variance, scalar or broadcastable to (T, N).
        iterations: number of factor/variable update rounds (>= 1).
        graph: optional prebuilt :class:`SparseFactorGraph`.
        prior: optional (V, M) or (T, V, M) prior probabilities.

    Returns:
        (T, V, M) probabilities (or (V, M) for a single trial), each row
        summing to one.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    y = np.asarray(received, dtype=complex)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    g = np.asarray(g_all, dtype=complex)
    if g.ndim == 2:
        g = g[None]
    t_count = y.shape[0]
    alphabet = np.asarray(alphabet, dtype=complex)
    m = len(alphabet)
    if graph is None:
        mag = np.abs(g).max(axis=0)
        graph = SparseFactorGraph(mag > tol * mag.max(), m, max_hypotheses)
    n0 = np.broadcast_to(np.asarray(n0, dtype=float), (t_count, y.shape[1]))
    if np.any(n0 <= 0):
        raise ValueError("noise variance must be positive")

    if prior is None:
        log_prior = np.full((t_count, graph.n_vars, m), -np.log(m))
    else:
        log_prior = np.log(np.clip(np.broadcast_to(prior, (t_count, graph.n_vars, m)), 1e-300, None))
        log_prior = _normalize(log_prior)

    # Per-group log-likelihood tables, shape (T, F, M**d).
    metrics = []
    for grp in graph.groups:
        gsel = g[:, grp.rows[:, None], grp.cols] if g.shape[0] > 1 else g[0][grp.rows[:, None], grp.cols][None]
        # predicted[t, f, c] = sum_i g[t, f, i] * alphabet[combo[c, i]]
        pred = np.einsum("tfi,ci->tfc", gsel, alphabet[grp.combos])
        err = y[:, grp.rows, None] - pred
        metrics.append(-np.abs(err) ** 2 / n0[:, grp.rows, None])

    var_to_fac = log_prior[:, graph.edge_var, :]
    fac_to_var = np.zeros_like(var_to_fac)
    for _ in range(iterations):
        for grp, metric in zip(graph.groups, metrics):
            f_count, d = grp.cols.shape
            incoming = var_to_fac[:, grp.edges, :]          # (T, F, d, M)
            total = metric.copy()
            for i in range(d):
                total += incoming[:, :, i, :][:, :, grp.combos[:, i]]
            total = total.reshape((t_count, f_count) + (m,) * d)
            for i in range(d):
                axes = tuple(2 + a for a in range(d) if a != i)
                marg = _lse(total, axes) if axes else total
                fac_to_var[:, grp.edges[:, i], :] = _normalize(marg - incoming[:, :, i, :])
        belief = log_prior.copy()
        np.add.at(belief, (slice(None), graph.edge_var), fac_to_var)
        var_to_fac = _normalize(belief[:, graph.edge_var, :] - fac_to_var)

    post = _normalize(belief)
    out = post if return_log else np.exp(post)
    return out[0] if single else out


def brute_force_marginals(received: np.ndarray, g: np.ndarray, alphabet: np.ndarray,
                          n0: float) -> np.ndarray:
    """Exact per-variable posteriors by enumerating all ``M**V`` hypotheses."""
    alphabet = np.asarray(alphabet, dtype=complex)
    m = len(alphabet)
    v = g.shape[1]
    hyp = np.array(list(itertools.product(range(m), repeat=v)), dtype=int)
    pts = alphabet[hyp] @ g.T
    logp = -np.sum(np.abs(received[None, :] - pts) ** 2, axis=1) / n0
    p = np.exp(logp - logsumexp(logp))
    out = np.zeros((v, m))
    for var in range(v):
        np.add.at(out[var], hyp[:, var], p)
    return out
