"""Binary LDPC codes: alist I/O, GF(2) systematic encoding, sum-product decoding."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import sparse

LLR_CLAMP = 50.0


# ---------------------------------------------------------------------------
# alist format
# ---------------------------------------------------------------------------

def read_alist(source) -> sparse.csr_matrix:
    """Parse an alist file (path or text) into a sparse binary parity-check matrix."""
    text = Path(source).read_text() if not (isinstance(source, str) and "\n" in source) else source
    tokens = [int(t) for t in text.split()]
    n, m = tokens[0], tokens[1]
    pos = 4 + n + m
    rows, cols = [], []
    col_w = tokens[4:4 + n]
    max_col = tokens[2]
    for c in range(n):
        entries = tokens[pos:pos + max_col]
        pos += max_col
        for r in entries[:col_w[c]]:
            if r > 0:
                rows.append(r - 1)
                cols.append(c)
    data = np.ones(len(rows), dtype=np.uint8)
    return sparse.csr_matrix((data, (rows, cols)), shape=(m, n))


def write_alist(h, path) -> None:
    """Write a binary matrix in alist format (zero-padded neighbour lists)."""
    h = sparse.csc_matrix(h)
    m, n = h.shape
    col_lists = [h.indices[h.indptr[c]:h.indptr[c + 1]] + 1 for c in range(n)]
    hr = h.tocsr()
    row_lists = [hr.indices[hr.indptr[r]:hr.indptr[r + 1]] + 1 for r in range(m)]
    max_c = max(len(c) for c in col_lists)
    max_r = max(len(r) for r in row_lists)

    def pad(lst, width):
        return " ".join(str(v) for v in list(lst) + [0] * (width - len(lst)))

    lines = [f"{n} {m}", f"{max_c} {max_r}",
             " ".join(str(len(c)) for c in col_lists),
             " ".join(str(len(r)) for r in row_lists)]
    lines += [pad(c, max_c) for c in col_lists]
    lines += [pad(r, max_r) for r in row_lists]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# GF(2) helpers
# ---------------------------------------------------------------------------

def gf2_row_reduce(h: np.ndarray, pivot_order: np.ndarray | None = None):
    """Reduced row echelon form over GF(2).

    Pivot columns are searched in ``pivot_order`` (default: right to left),
    so a code with an invertible right block gets its parity there.
    Returns (reduced matrix with zero rows removed, pivot columns).
    """
    a = (np.asarray(h) % 2).astype(bool).copy()
    m, n = a.shape
    order = np.arange(n - 1, -1, -1) if pivot_order is None else np.asarray(pivot_order)
    pivots = []
    row = 0
    for col in order:
        if row == m:
            break
        cand = np.flatnonzero(a[row:, col])
        if len(cand) == 0:
            continue
        p = row + cand[0]
        if p != row:
            a[[row, p]] = a[[p, row]]
        others = np.flatnonzero(a[:, col])
        others = others[others != row]
        a[others] ^= a[row]
        pivots.append(col)
        row += 1
    return a[:row], np.array(pivots, dtype=int)


def gf2_rank(h) -> int:
    return len(gf2_row_reduce(np.asarray(h.todense() if sparse.issparse(h) else h))[1])


# ---------------------------------------------------------------------------
# Code
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Systematic LDPC code defined by a sparse parity-check matrix.

    Information bits occupy the non-pivot columns (in increasing order), the
    parity bits the pivot columns found by GF(2) elimination.
    """

    parity_check: sparse.csr_matrix
    name: str = "custom"
    _enc: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        h = sparse.csr_matrix(self.parity_check, dtype=np.uint8)
        h.sum_duplicates()
        h.data %= 2
        h.eliminate_zeros()
        object.__setattr__(self, "parity_check", h)
        dense = h.toarray()
        reduced, pivots = gf2_row_reduce(dense)
        info = np.setdiff1d(np.arange(h.shape[1]), pivots)
        # reduced[r, pivots[r]] = 1 and no other pivot column is set in row r,
        # so parity[pivots[r]] = reduced[r, info] . u
        self._enc["pivots"] = pivots
        self._enc["info"] = info
        self._enc["parity_map"] = reduced[:, info].astype(np.uint8)

    @property
    def frame_bits(self) -> int:
        return self.parity_check.shape[1]

    @property
    def n_checks(self) -> int:
        return self.parity_check.shape[0]

    @property
    def rank(self) -> int:
        return len(self._enc["pivots"])

    @property
    def info_bits(self) -> int:
        return self.frame_bits - self.rank

    @property
    def rate(self) -> float:
        return self.info_bits / self.frame_bits

    @property
    def info_positions(self) -> np.ndarray:
        return self._enc["info"]

    @cached_property
    def edges(self):
        """(check, variable) index arrays sorted by check."""
        coo = self.parity_check.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order].astype(np.int64), coo.col[order].astype(np.int64)

    @cached_property
    def edge_to_var(self) -> sparse.csr_matrix:
        """Incidence matrix summing per-edge values into variables, (E, n)."""
        _, var = self.edges
        e = len(var)
        return sparse.csr_matrix((np.ones(e), (np.arange(e), var)), shape=(e, self.frame_bits))

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        bits = np.atleast_2d(bits).astype(np.int64)
        return (self.parity_check @ bits.T).T % 2

    def is_codeword(self, bits: np.ndarray) -> np.ndarray:
        return ~np.any(self.syndrome(bits), axis=-1)


def encode(info_bits: np.ndarray, code: LdpcCode) -> np.ndarray:
    """Systematic encoding; accepts (k,) or (T, k) info bits."""
    u = np.asarray(info_bits, dtype=np.int64)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    if u.shape[-1] != code.info_bits:
        raise ValueError(f"expected {code.info_bits} info bits, got {u.shape[-1]}")
    c = np.zeros((u.shape[0], code.frame_bits), dtype=np.int8)
    c[:, code.info_positions] = u
    c[:, code._enc["pivots"]] = (u @ code._enc["parity_map"].T.astype(np.int64)) % 2
    return c[0] if single else c


def extract_info(codeword: np.ndarray, code: LdpcCode) -> np.ndarray:
    return np.asarray(codeword)[..., code.info_positions]


@dataclass
class DecodeResult:
    aposteriori: np.ndarray
    extrinsic: np.ndarray
    hard_bits: np.ndarray
    converged: np.ndarray
    iterations: int


def _phi(x: np.ndarray) -> np.ndarray:
    """``-log(tanh(x/2))`` for x >= 0, clipped to stay finite."""
    x = np.clip(x, 1e-12, 60.0)
    return -np.log(-np.expm1(-x)) + np.log1p(np.exp(-x))


def decode(channel_llrs: np.ndarray, code: LdpcCode, iterations: int = 8,
           early_stop: bool = True) -> DecodeResult:
    """Flooding sum-product decoding; LLRs are ``log P(0)/P(1)``.

    Accepts (n,) or (T, n) LLRs. The extrinsic output is the a-posteriori LLR
    minus the channel input.
    """
    llr = np.clip(np.asarray(channel_llrs, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    single = llr.ndim == 1
    llr = np.atleast_2d(llr)
    if llr.shape[-1] != code.frame_bits:
        raise ValueError(f"expected {code.frame_bits} LLRs, got {llr.shape[-1]}")
    chk, var = code.edges
    starts = np.flatnonzero(np.r_[True, chk[1:] != chk[:-1]])

    v2c = llr[:, var]
    post = llr.copy()
    hard = (post < 0).astype(np.int8)
    converged = code.is_codeword(hard)
    used = 0
    if early_stop and np.all(converged) and iterations > 0:
        # already a codeword; one pass keeps the outputs well defined
        iterations = 1
    for it in range(iterations):
        used = it + 1
        mag = _phi(np.abs(v2c))
        neg = (v2c < 0).astype(np.int64)
        tot_mag = np.add.reduceat(mag, starts, axis=1)
        tot_neg = np.add.reduceat(neg, starts, axis=1)
        seg = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, len(chk)]))
        ext_mag = _phi(np.maximum(tot_mag[:, seg] - mag, 0.0))
        sign = 1 - 2 * ((tot_neg[:, seg] - neg) % 2)
        c2v = np.clip(sign * ext_mag, -LLR_CLAMP, LLR_CLAMP)
        post = llr + np.asarray(code.edge_to_var.T @ c2v.T).T
        v2c = post[:, var] - c2v
        hard = (post < 0).astype(np.int8)
        converged = code.is_codeword(hard)
        if early_stop and np.all(converged):
            break
    out = DecodeResult(post, post - llr, hard, converged, used)
    if single:
        out = DecodeResult(post[0], (post - llr)[0], hard[0], bool(converged[0]), used)
    return out


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def peg_staircase(n: int, m: int, info_degree: int = 3, seed: int = 0) -> sparse.csr_matrix:
    """Parity-check matrix ``[H_info | T]`` with a dual-diagonal parity block.

    ``T`` has ones on its diagonal and first subdiagonal, which makes the
    right block invertible. ``H_info`` is grown column by column with
    progressive edge growth: each new edge goes to the lowest-degree check
    among those farthest from the current variable in the Tanner graph.
    """
    k = n - m
    if k <= 0:
        raise ValueError("need n > m")
    rng = np.random.default_rng(seed)
    check_adj: list[list[int]] = [[] for _ in range(m)]
    var_adj: list[list[int]] = [[] for _ in range(n)]
    # staircase parity columns k..n-1
    for r in range(m):
        for c in ((k + r, k + r - 1) if r > 0 else (k,)):
            check_adj[r].append(c)
            var_adj[c].append(r)
    check_deg = np.array([len(c) for c in check_adj], dtype=float)

    for v in range(k):
        for e in range(info_degree):
            if e == 0:
                reach = np.zeros(m, dtype=bool)
            else:
                reach = _bfs_checks(v, var_adj, check_adj, m)
            cand = np.flatnonzero(~reach)
            if len(cand) == 0:
                # every check reachable: fall back to those not already linked
                cand = np.setdiff1d(np.arange(m), var_adj[v])
            low = cand[check_deg[cand] == check_deg[cand].min()]
            c = int(rng.choice(low))
            check_adj[c].append(v)
            var_adj[v].append(c)
            check_deg[c] += 1
    rows = [r for r in range(m) for _ in check_adj[r]]
    cols = [c for r in range(m) for c in check_adj[r]]
    return sparse.csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(m, n))


def _bfs_checks(v: int, var_adj, check_adj, m: int) -> np.ndarray:
    """Checks reachable from variable ``v``; stops at the last depth that grows
    the set without covering every check."""
    seen_c = np.zeros(m, dtype=bool)
    seen_v = {v}
    frontier_c = set(var_adj[v])
    for c in frontier_c:
        seen_c[c] = True
    while True:
        next_v = {u for c in frontier_c for u in check_adj[c]} - seen_v
        seen_v |= next_v
        next_c = {c for u in next_v for c in var_adj[u] if not seen_c[c]}
        if not next_c:
            return seen_c
        trial = seen_c.copy()
        trial[list(next_c)] = True
        if trial.all():
            return seen_c
        seen_c = trial
        frontier_c = next_c


DEFAULT_CODE_FILE = "ldpc_2048_r23.alist"


def default_code() -> LdpcCode:
    """The shipped 2048-bit code with 683 checks (rate 1365/2048)."""
    text = resources.files("afdm_scma.coding").joinpath("data", DEFAULT_CODE_FILE).read_text()
    return LdpcCode(read_alist(text), name="ldpc-2048-r2/3")
