"""SCMA codebook algebra.

Codebooks are generated from a sparse complex signature matrix ``Z``
(K resources x J users): user ``j`` sends ``Z[:, j] * a`` for a base
constellation point ``a``. The superimposed block is then ``w = Z @ s``
with ``s`` the vector of per-user base symbols, which is what lets the
multiuser channel collapse to an ``N x NJ/K`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.linalg import block_diag

DEFAULT_INDICATOR = np.array([
    [0, 1, 1, 0, 1, 0],
    [1, 0, 1, 0, 0, 1],
    [0, 1, 0, 1, 0, 1],
    [1, 0, 0, 1, 1, 0],
], dtype=int)

# Pattern of the three distinct downlink signature entries (1-based, 0 = empty).
DEFAULT_DOWNLINK_PATTERN = np.array([
    [0, 1, 2, 0, 3, 0],
    [1, 0, 2, 0, 0, 3],
    [0, 3, 0, 2, 0, 1],
    [3, 0, 0, 2, 1, 0],
], dtype=int)

DEFAULT_DOWNLINK_VALUES = (1.07j, 0.53, 0.27)


# ---------------------------------------------------------------------------
# Constellations
# ---------------------------------------------------------------------------

def qpsk_alphabet() -> np.ndarray:
    """Unit-energy QPSK in natural-binary order; bit 0 -> +, bit 1 -> - (Gray)."""
    return np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)


def bpsk_alphabet() -> np.ndarray:
    return np.array([1.0 + 0j, -1.0 + 0j])


def alphabet_for(m: int) -> np.ndarray:
    if m == 2:
        return bpsk_alphabet()
    if m == 4:
        return qpsk_alphabet()
    raise ValueError(f"no built-in alphabet of size {m}")


def bit_labels(m: int) -> np.ndarray:
    """Natural binary labels, shape (m, log2 m), most significant bit first."""
    nbits = int(round(np.log2(m)))
    if 2 ** nbits != m:
        raise ValueError("alphabet size must be a power of two")
    idx = np.arange(m)[:, None]
    return ((idx >> np.arange(nbits - 1, -1, -1)[None, :]) & 1).astype(np.int8)


def bits_to_indices(bits: np.ndarray, m: int) -> np.ndarray:
    """Group trailing-axis bits into symbol indices (MSB first)."""
    nbits = int(round(np.log2(m)))
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] % nbits:
        raise ValueError(f"bit count must be a multiple of {nbits}")
    b = bits.reshape(bits.shape[:-1] + (-1, nbits))
    return b @ (1 << np.arange(nbits - 1, -1, -1))


def indices_to_bits(idx: np.ndarray, m: int) -> np.ndarray:
    labels = bit_labels(m)
    out = labels[np.asarray(idx)]
    return out.reshape(out.shape[:-2] + (-1,))


# ---------------------------------------------------------------------------
# Configuration and signatures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScmaConfig:
    """Resource/user layout given by a K x J binary indicator matrix."""

    indicator: np.ndarray = field(default_factory=lambda: DEFAULT_INDICATOR.copy())
    m: int = 4

    def __post_init__(self):
        f = np.asarray(self.indicator, dtype=int)
        if f.ndim != 2 or not np.isin(f, (0, 1)).all():
            raise ValueError("indicator must be a binary matrix")
        col = f.sum(axis=0)
        row = f.sum(axis=1)
        if np.any(col != col[0]) or np.any(row != row[0]) or col[0] == 0:
            raise ValueError("indicator must have constant nonzero row and column weights")
        f.setflags(write=False)
        object.__setattr__(self, "indicator", f)
        bit_labels(self.m)

    @property
    def k(self) -> int:
        return self.indicator.shape[0]

    @property
    def j(self) -> int:
        return self.indicator.shape[1]

    @property
    def v(self) -> int:
        return int(self.indicator[:, 0].sum())

    @property
    def d_f(self) -> int:
        return int(self.indicator[0].sum())

    @property
    def bits_per_symbol(self) -> int:
        return int(round(np.log2(self.m)))

    @property
    def overload(self) -> float:
        return self.j / self.k

    def support(self, user: int) -> np.ndarray:
        return np.flatnonzero(self.indicator[:, user])

    def mapping_matrix(self, user: int) -> np.ndarray:
        """K x V matrix: I_V with zero rows inserted where the user is absent."""
        out = np.zeros((self.k, self.v))
        out[self.support(user), np.arange(self.v)] = 1.0
        return out


@dataclass(frozen=True)
class SignatureMatrix:
    """Sparse K x J complex matrix whose support defines the user layout."""

    z: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=complex)
        if z.ndim != 2:
            raise ValueError("signature must be a matrix")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def support(self) -> np.ndarray:
        return (np.abs(self.z) > 0).astype(int)

    def matches(self, config: ScmaConfig) -> bool:
        return self.z.shape == config.indicator.shape and np.array_equal(self.support, config.indicator)

    def column_powers(self) -> np.ndarray:
        return np.sum(np.abs(self.z) ** 2, axis=0)

    @classmethod
    def from_pattern(cls, pattern: np.ndarray, values) -> "SignatureMatrix":
        pattern = np.asarray(pattern, dtype=int)
        vals = np.concatenate([[0], np.asarray(values, dtype=complex)])
        return cls(vals[pattern])


def uplink_signature(config: ScmaConfig | None = None) -> SignatureMatrix:
    """The uplink signature is the indicator matrix itself."""
    config = config or ScmaConfig()
    return SignatureMatrix(config.indicator.astype(complex))


def downlink_signature(values=DEFAULT_DOWNLINK_VALUES,
                       pattern: np.ndarray = DEFAULT_DOWNLINK_PATTERN) -> SignatureMatrix:
    """Downlink signature with three distinct entries laid out on ``pattern``."""
    return SignatureMatrix.from_pattern(pattern, values)


class Direction(str, Enum):
    UPLINK = "uplink"
    DOWNLINK = "downlink"


@dataclass(frozen=True)
class Codebook:
    """Per-user K x M codebooks generated from a (normalised) signature.

    ``matrices[j]`` is user j's codebook; ``signature`` is the matrix that
    satisfies ``w = signature @ s`` for base symbols ``s``.
    """

    matrices: np.ndarray
    signature: np.ndarray
    alphabet: np.ndarray
    config: ScmaConfig

    @property
    def j(self) -> int:
        return self.matrices.shape[0]

    @property
    def k(self) -> int:
        return self.matrices.shape[1]

    @property
    def m(self) -> int:
        return self.matrices.shape[2]

    def codeword(self, user: int, index: int) -> np.ndarray:
        return self.matrices[user][:, index]


def build_codebooks(alphabet: np.ndarray, config: ScmaConfig, signature: SignatureMatrix,
                    direction: Direction | str = Direction.DOWNLINK,
                    normalization: str = "per_user") -> Codebook:
    """Generate every user's codebook by scaling a repeated base constellation.

    Downlink codebooks use the full complex signature; uplink codebooks keep
    only the support (no power scaling or rotation). ``normalization``:
    ``"per_user"`` scales each column so ``trace(X_j^H X_j) = M``;
    ``"global"`` applies one common factor so the average over users is M.
    """
    alphabet = np.asarray(alphabet, dtype=complex)
    if len(alphabet) != config.m:
        raise ValueError(f"alphabet has {len(alphabet)} points, config expects {config.m}")
    if not signature.matches(config):
        raise ValueError("signature support does not match the indicator matrix")
    direction = Direction(direction)
    z = signature.z if direction is Direction.DOWNLINK else config.indicator.astype(complex)
    base_energy = np.mean(np.abs(alphabet) ** 2)
    powers = np.sum(np.abs(z) ** 2, axis=0) * base_energy
    if normalization == "per_user":
        z = z / np.sqrt(powers)[None, :]
    elif normalization == "global":
        z = z / np.sqrt(powers.mean())
    elif normalization != "none":
        raise ValueError(f"unknown normalization {normalization!r}")
    mats = z.T[:, :, None] * alphabet[None, None, :]
    mats.setflags(write=False)
    z.setflags(write=False)
    return Codebook(mats, z, alphabet, config)


def encode_bits(bits, codebook: Codebook, user: int) -> np.ndarray:
    """Map log2(M) bits (MSB first) to the user's K-dim codeword."""
    bits = np.asarray(bits)
    nbits = int(round(np.log2(codebook.m)))
    if bits.shape != (nbits,):
        raise ValueError(f"expected {nbits} bits, got shape {bits.shape}")
    return codebook.codeword(user, int(bits_to_indices(bits, codebook.m)[0]))


def superimpose(codewords: np.ndarray) -> np.ndarray:
    """Sum the users' codewords; axis -2 indexes users, axis -1 resources."""
    return np.asarray(codewords).sum(axis=-2)


# ---------------------------------------------------------------------------
# Minimum Euclidean distance
# ---------------------------------------------------------------------------

def _difference_set(alphabet: np.ndarray) -> np.ndarray:
    d = (alphabet[:, None] - alphabet[None, :]).ravel()
    key = np.round(d.real, 12) + 1j * np.round(d.imag, 12)
    uniq = np.unique(key)
    # zero first so index 0 is the all-zero difference
    return np.concatenate([[0], uniq[np.abs(uniq) > 0]])


def med(signature: SignatureMatrix | np.ndarray, alphabet: np.ndarray,
        cap: int = 2 ** 20) -> float:
    """Minimum distance between distinct superimposed points ``Z @ s``.

    Enumerates nonzero difference vectors ``s - s'``; a collision between two
    different symbol vectors yields zero.
    """
    z = signature.z if isinstance(signature, SignatureMatrix) else np.asarray(signature, dtype=complex)
    alphabet = np.asarray(alphabet, dtype=complex)
    k, j = z.shape
    if len(alphabet) ** j > cap:
        raise ValueError(f"{len(alphabet)}^{j} points exceed the enumeration cap {cap}")
    diffs = _difference_set(alphabet)
    acc = np.zeros((1, k), dtype=complex)
    for user in range(j):
        acc = (acc[:, None, :] + diffs[None, :, None] * z[None, None, :, user]).reshape(-1, k)
    dist2 = np.sum(np.abs(acc[1:]) ** 2, axis=1)
    return float(np.sqrt(dist2.min()))


def optimize_signature(config: ScmaConfig | None = None, alphabet: np.ndarray | None = None,
                       budget: int = 200, seed: int = 0,
                       pattern: np.ndarray = DEFAULT_DOWNLINK_PATTERN,
                       initial=DEFAULT_DOWNLINK_VALUES, starts: int = 4) -> SignatureMatrix:
    """Maximise the MED over per-entry powers and phases.

    The entries ``z_i = sqrt(E_i) exp(j theta_i)`` keep ``pattern`` fixed and
    ``sum E_i = d_f / V``. Coordinate search: each step perturbs one phase or
    moves power between two entries and is kept only if the MED grows. The
    first start is the projected ``initial`` values; ``budget`` counts MED
    evaluations. ``budget=0`` returns ``initial`` untouched.
    """
    config = config or ScmaConfig()
    alphabet = qpsk_alphabet() if alphabet is None else np.asarray(alphabet)
    if budget <= 0:
        return SignatureMatrix.from_pattern(pattern, initial)
    total = config.d_f / config.v
    initial = np.asarray(initial, dtype=complex)
    n_vals = len(initial)
    if total <= 0 or n_vals == 0:
        raise ValueError("infeasible power constraint")
    rng = np.random.default_rng(seed)

    def score(e, th):
        return med(SignatureMatrix.from_pattern(pattern, np.sqrt(e) * np.exp(1j * th)), alphabet)

    e0 = np.abs(initial) ** 2
    e0 = e0 * total / e0.sum()
    th0 = np.angle(initial)
    best_e, best_th, best = e0, th0, score(e0, th0)
    used = 1
    per_start = max(1, (budget - 1) // max(starts, 1))
    for start in range(starts):
        if used >= budget:
            break
        if start == 0:
            e, th, cur = best_e.copy(), best_th.copy(), best
        else:
            e = rng.dirichlet(np.ones(n_vals)) * total
            th = rng.uniform(0, 2 * np.pi, n_vals)
            cur = score(e, th)
            used += 1
        step_e, step_th = 0.1 * total, 0.3
        for _ in range(per_start):
            if used >= budget:
                break
            cand_e, cand_th = e.copy(), th.copy()
            if rng.random() < 0.5:
                i = rng.integers(n_vals)
                cand_th[i] = (cand_th[i] + rng.choice((-1, 1)) * step_th) % (2 * np.pi)
            else:
                a, b = rng.choice(n_vals, 2, replace=False)
                delta = min(step_e * rng.random(), cand_e[a])
                cand_e[a] -= delta
                cand_e[b] += delta
            val = score(cand_e, cand_th)
            used += 1
            if val > cur:
                e, th, cur = cand_e, cand_th, val
            else:
                step_e *= 0.97
                step_th *= 0.97
        if cur > best:
            best_e, best_th, best = e, th, cur
    best_e = best_e * total / best_e.sum()
    return SignatureMatrix.from_pattern(pattern, np.sqrt(best_e) * np.exp(1j * best_th))


# ---------------------------------------------------------------------------
# Allocation to subcarriers
# ---------------------------------------------------------------------------

class Allocation(str, Enum):
    LOCALIZED = "localized"
    INTERLEAVED = "interleaved"


def allocation_indices(n: int, k: int, scheme: Allocation | str) -> np.ndarray:
    """Subcarrier index of entry k of group q, shape (Q, K)."""
    if n % k:
        raise ValueError(f"n={n} is not divisible by K={k}")
    q = n // k
    scheme = Allocation(scheme)
    qq, kk = np.meshgrid(np.arange(q), np.arange(k), indexing="ij")
    if scheme is Allocation.LOCALIZED:
        return qq * k + kk
    return kk * q + qq


def allocate(groups: np.ndarray, scheme: Allocation | str, n: int | None = None) -> np.ndarray:
    """Place per-group K-vectors (axis -2 groups, axis -1 entries) on n subcarriers."""
    groups = np.asarray(groups)
    q, k = groups.shape[-2:]
    n = q * k if n is None else n
    if n != q * k:
        raise ValueError(f"{q} groups of {k} do not fill n={n}")
    idx = allocation_indices(n, k, scheme).ravel()
    out = np.zeros(groups.shape[:-2] + (n,), dtype=groups.dtype)
    out[..., idx] = groups.reshape(groups.shape[:-2] + (n,))
    return out


def deallocate(x: np.ndarray, scheme: Allocation | str, k: int) -> np.ndarray:
    x = np.asarray(x)
    n = x.shape[-1]
    idx = allocation_indices(n, k, scheme)
    return x[..., idx]


def effective_signature(signature: SignatureMatrix | np.ndarray, scheme: Allocation | str,
                        n: int) -> np.ndarray:
    """Block-diagonal N x (N J / K) signature with rows placed by the allocation.

    Column ``q * J + j`` carries user j's base symbol in group q.
    """
    z = signature.z if isinstance(signature, SignatureMatrix) else np.asarray(signature, dtype=complex)
    k = z.shape[0]
    if n % k:
        raise ValueError(f"n={n} is not divisible by K={k}")
    blk = block_diag(*([z] * (n // k)))
    out = np.zeros_like(blk)
    out[allocation_indices(n, k, scheme).ravel()] = blk
    return out


def user_columns(user: int, n_groups: int, j: int) -> np.ndarray:
    """Columns of the effective signature that belong to ``user``."""
    return np.arange(n_groups) * j + user


def uplink_effective_matrix(channels: np.ndarray, z_sym: np.ndarray, j: int) -> np.ndarray:
    """Stack per-user channels: column block of user j is ``H_j @ Z_sym[:, cols_j]``.

    ``channels`` has shape (J, N, N) (or (N, N) when shared by all users).
    """
    channels = np.asarray(channels)
    n_groups = z_sym.shape[1] // j
    if channels.ndim == 2:
        return channels @ z_sym
    out = np.empty((channels.shape[1], z_sym.shape[1]), dtype=complex)
    for user in range(j):
        cols = user_columns(user, n_groups, j)
        out[:, cols] = channels[user] @ z_sym[:, cols]
    return out


def symbol_vector(indices: np.ndarray, alphabet: np.ndarray) -> np.ndarray:
    """Map (..., Q, J) symbol indices to the flattened base-symbol vector."""
    idx = np.asarray(indices)
    return alphabet[idx].reshape(idx.shape[:-2] + (-1,))


# ---------------------------------------------------------------------------
# Plain-text matrix I/O
# ---------------------------------------------------------------------------

def save_matrix_text(mat: np.ndarray, path) -> None:
    """One row per line, each entry written as ``re im``."""
    mat = np.atleast_2d(np.asarray(mat, dtype=complex))
    lines = [f"{mat.shape[0]} {mat.shape[1]}"]
    for row in mat:
        lines.append(" ".join(f"{v.real:.17g} {v.imag:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix_text(path) -> np.ndarray:
    lines = Path(path).read_text().split("\n")
    rows, cols = (int(t) for t in lines[0].split())
    vals = np.array([[float(t) for t in line.split()] for line in lines[1:1 + rows]])
    if vals.shape != (rows, 2 * cols):
        raise ValueError("matrix text does not match its header")
    return vals[:, 0::2] + 1j * vals[:, 1::2]
