"""Discrete affine Fourier transform (DAFT) modem.

The DAFT matrix is ``A = Lambda_c2 @ F @ Lambda_c1`` with
``Lambda_c = diag(exp(-2j*pi*c*n**2))`` and ``F`` the unitary DFT. AFDM
modulates with ``A^H`` and demodulates with ``A``; ``c1 = c2 = 0`` is OFDM.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class AfdmParams:
    """Modem identity: transform size, chirp rates and prefix length."""

    n: int
    c1: float = 0.0
    c2: float = 0.0
    n_cpp: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n <= 0:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("chirp rates must be nonnegative")
        if self.n_cpp < 0 or self.n_cpp >= self.n:
            raise ValueError(f"n_cpp must satisfy 0 <= n_cpp < n, got {self.n_cpp}")

    @classmethod
    def ofdm(cls, n: int, n_cpp: int = 0) -> "AfdmParams":
        return cls(n=n, c1=0.0, c2=0.0, n_cpp=n_cpp)

    def with_chirps(self, c1: float, c2: float) -> "AfdmParams":
        return AfdmParams(self.n, c1, c2, self.n_cpp)


def chirp_diagonal(n: int, c: float) -> np.ndarray:
    """Diagonal of ``Lambda_c``: ``exp(-2j*pi*c*k**2)`` for k = 0..n-1."""
    k = np.arange(n, dtype=float)
    # k**2 * c reduced mod 1 keeps the phase accurate for large n
    return np.exp(-2j * np.pi * np.mod(c * k * k, 1.0))


@lru_cache(maxsize=64)
def _daft_matrix_cached(n: int, c1: float, c2: float) -> np.ndarray:
    k = np.arange(n)
    dft = np.exp(-2j * np.pi * (np.outer(k, k) % n) / n) / np.sqrt(n)
    a = chirp_diagonal(n, c2)[:, None] * dft * chirp_diagonal(n, c1)[None, :]
    a.setflags(write=False)
    return a


def daft_matrix(params: AfdmParams) -> np.ndarray:
    """Return the unitary n x n DAFT matrix for ``params`` (read-only)."""
    return _daft_matrix_cached(params.n, float(params.c1), float(params.c2))


def _check_length(x: np.ndarray, n: int, what: str) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != n:
        raise ValueError(f"{what} must have length {n}, got {x.shape[-1]}")
    return x


def modulate(x: np.ndarray, params: AfdmParams) -> np.ndarray:
    """IDAFT: ``s = A^H x``. Accepts a trailing axis of length n."""
    x = _check_length(x, params.n, "DAFT-domain vector")
    return x @ daft_matrix(params).conj()


def demodulate(r: np.ndarray, params: AfdmParams) -> np.ndarray:
    """DAFT: ``y = A r`` (prefix already removed)."""
    r = _check_length(r, params.n, "time-domain vector")
    return r @ daft_matrix(params).T


def modulate_fast(x: np.ndarray, params: AfdmParams) -> np.ndarray:
    """FFT form of :func:`modulate`: two chirp multiplies around an IFFT."""
    x = _check_length(x, params.n, "DAFT-domain vector")
    n = params.n
    inner = np.fft.ifft(x * chirp_diagonal(n, params.c2).conj(), norm="ortho")
    return inner * chirp_diagonal(n, params.c1).conj()


def demodulate_fast(r: np.ndarray, params: AfdmParams) -> np.ndarray:
    """FFT form of :func:`demodulate`."""
    r = _check_length(r, params.n, "time-domain vector")
    n = params.n
    inner = np.fft.fft(r * chirp_diagonal(n, params.c1), norm="ortho")
    return inner * chirp_diagonal(n, params.c2)


def cpp_phase(params: AfdmParams) -> np.ndarray:
    """Phase factors applied to the copied tail, for prefix indices -n_cpp..-1."""
    n = params.n
    idx = np.arange(-params.n_cpp, 0, dtype=float)
    return np.exp(-2j * np.pi * np.mod(params.c1 * (n * n + 2 * n * idx), 1.0))


def add_cpp(s: np.ndarray, params: AfdmParams) -> np.ndarray:
    """Prepend the chirp-periodic prefix; output length ``n + n_cpp``."""
    s = _check_length(s, params.n, "time-domain vector")
    if params.n_cpp == 0:
        return np.array(s, dtype=complex)
    tail = s[..., params.n - params.n_cpp:]
    return np.concatenate([tail * cpp_phase(params), s], axis=-1)


def remove_cpp(s: np.ndarray, params: AfdmParams) -> np.ndarray:
    s = _check_length(s, params.n + params.n_cpp, "prefixed time-domain vector")
    return s[..., params.n_cpp:]


def select_c1(alpha_max: int, k_nu: int, min_delay_gap: int, n: int) -> float:
    """Smallest chirp rate that keeps the per-path DAFT-domain bands apart.

    ``c1 >= (2*(alpha_max + k_nu) + 1) / (2 * n * min_delay_gap)``.
    """
    if min_delay_gap <= 0:
        raise ValueError(
            "min_delay_gap must be >= 1; paths sharing a delay must be merged first"
        )
    if n <= 0:
        raise ValueError("n must be positive")
    return (2 * (alpha_max + k_nu) + 1) / (2 * n * min_delay_gap)


def select_c2(n: int) -> float:
    """Deterministic rational second chirp rate, ``1/(4 n^2)`` (< 1/(2n))."""
    if n <= 0:
        raise ValueError("n must be positive")
    return 1.0 / (4.0 * n * n)
