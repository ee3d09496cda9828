"""Doubly-selective channels: path models, time-domain matrices and the
DAFT-domain effective channel.

A path has complex gain ``h``, integer delay ``l`` (samples) and Doppler
``nu`` normalised to the subcarrier spacing. Its time-domain response is
``h * exp(-2j*pi*nu*n/N)`` at delay ``l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .afdm import AfdmParams, daft_matrix


@dataclass(frozen=True)
class ChannelPath:
    gain: complex
    delay: int
    doppler: float = 0.0

    def __post_init__(self):
        if int(self.delay) != self.delay or self.delay < 0:
            raise ValueError(f"delay must be a nonnegative integer, got {self.delay}")

    @property
    def alpha(self) -> int:
        """Integer Doppler part; ``doppler = alpha + beta`` with beta in (-1/2, 1/2]."""
        return int(math.ceil(self.doppler - 0.5))

    @property
    def beta(self) -> float:
        return self.doppler - self.alpha


@dataclass(frozen=True)
class ChannelRealization:
    paths: tuple[ChannelPath, ...]

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if len(self.paths) == 0:
            raise ValueError("a realization needs at least one path")

    @classmethod
    def from_arrays(cls, gains, delays, dopplers=None) -> "ChannelRealization":
        gains = np.atleast_1d(gains)
        delays = np.atleast_1d(delays)
        dopplers = np.zeros(len(gains)) if dopplers is None else np.atleast_1d(dopplers)
        return cls(tuple(
            ChannelPath(complex(g), int(l), float(v)) for g, l, v in zip(gains, delays, dopplers)
        ))

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=complex)

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.paths], dtype=int)

    @property
    def dopplers(self) -> np.ndarray:
        return np.array([p.doppler for p in self.paths], dtype=float)

    @property
    def distinct_delays(self) -> bool:
        return len(set(self.delays.tolist())) == len(self.paths)

    @property
    def max_delay(self) -> int:
        return int(self.delays.max())

    def min_delay_gap(self) -> int:
        d = np.sort(self.delays)
        if len(d) < 2:
            return 1
        return int(np.min(np.diff(d)))

    def with_unit_gains(self) -> "ChannelRealization":
        return ChannelRealization(tuple(
            ChannelPath(1.0 + 0j, p.delay, p.doppler) for p in self.paths
        ))


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathProfile:
    """Integer-delay power profile.

    ``dopplers`` pins the per-path Doppler; otherwise each draw uses
    ``nu_max * cos(psi)`` with ``psi ~ U[-pi, pi]``.
    """

    delays: tuple[int, ...]
    powers: tuple[float, ...]
    nu_max: float = 0.0
    dopplers: tuple[float, ...] | None = None

    def __post_init__(self):
        delays = tuple(int(d) for d in self.delays)
        powers = np.asarray(self.powers, dtype=float)
        if len(delays) != len(powers) or len(delays) == 0:
            raise ValueError("delays and powers must be nonempty and of equal length")
        if np.any(powers < 0) or powers.sum() <= 0:
            raise ValueError("powers must be nonnegative with positive sum")
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "powers", tuple((powers / powers.sum()).tolist()))
        if self.dopplers is not None:
            if len(self.dopplers) != len(delays):
                raise ValueError("dopplers must match the number of paths")
            object.__setattr__(self, "dopplers", tuple(float(v) for v in self.dopplers))

    @property
    def num_paths(self) -> int:
        return len(self.delays)


def uniform_profile(num_paths: int, nu_max: float = 0.0, delays: Sequence[int] | None = None,
                    dopplers: Sequence[float] | None = None) -> PathProfile:
    """``num_paths`` equal-power paths (variance 1/P) at delays 0..P-1 by default."""
    if delays is None:
        delays = range(num_paths)
    return PathProfile(tuple(delays), (1.0,) * num_paths, nu_max,
                       None if dopplers is None else tuple(dopplers))


EVA_POWERS_DB = (0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9)
EVA_DELAYS_NS = (0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0)
SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class EvaProfile:
    """Extended Vehicular A power-delay profile with a max-Doppler spec."""

    tap_powers_db: tuple[float, ...] = EVA_POWERS_DB
    tap_delays_ns: tuple[float, ...] = EVA_DELAYS_NS
    max_doppler_hz: float = 1100.0
    subcarrier_spacing_hz: float = 15e3
    carrier_hz: float = 4e9
    speed_kmh: float = 300.0

    @property
    def nu_max(self) -> float:
        """Maximum Doppler normalised to the subcarrier spacing."""
        return self.max_doppler_hz / self.subcarrier_spacing_hz

    def doppler_from_speed_hz(self) -> float:
        return self.speed_kmh / 3.6 * self.carrier_hz / SPEED_OF_LIGHT

    def quantized_delays(self, n: int) -> np.ndarray:
        """Tap delays rounded to the nearest sample at rate ``n * spacing``."""
        rate = n * self.subcarrier_spacing_hz
        return np.rint(np.asarray(self.tap_delays_ns) * 1e-9 * rate).astype(int)

    def to_path_profile(self, n: int) -> PathProfile:
        """Quantise to integer delays; taps landing on one sample are merged."""
        q = self.quantized_delays(n)
        lin = 10.0 ** (np.asarray(self.tap_powers_db) / 10.0)
        merged: dict[int, float] = {}
        for d, p in zip(q.tolist(), lin.tolist()):
            merged[d] = merged.get(d, 0.0) + p
        delays = tuple(sorted(merged))
        return PathProfile(delays, tuple(merged[d] for d in delays), self.nu_max)


Profile = Union[PathProfile, EvaProfile]


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_realization(profile: Profile, rng, params: AfdmParams) -> ChannelRealization:
    """Draw Rayleigh gains and Dopplers for every path of ``profile``."""
    if isinstance(profile, EvaProfile):
        profile = profile.to_path_profile(params.n)
    if max(profile.delays) > params.n_cpp:
        raise ValueError(
            f"profile delay {max(profile.delays)} exceeds the prefix length {params.n_cpp}"
        )
    rng = _as_generator(rng)
    p = profile.num_paths
    var = np.asarray(profile.powers)
    gains = np.sqrt(var / 2) * (rng.standard_normal(p) + 1j * rng.standard_normal(p))
    if profile.dopplers is not None:
        nus = np.asarray(profile.dopplers)
    elif profile.nu_max == 0:
        nus = np.zeros(p)
    else:
        nus = profile.nu_max * np.cos(rng.uniform(-np.pi, np.pi, p))
    return ChannelRealization.from_arrays(gains, profile.delays, nus)


# ---------------------------------------------------------------------------
# Time domain
# ---------------------------------------------------------------------------

def cpp_matrix_diagonal(delay: int, params: AfdmParams) -> np.ndarray:
    """Diagonal of the effective prefix matrix for one path."""
    n = params.n
    k = np.arange(n, dtype=float)
    phase = np.where(k < delay, params.c1 * (n * n - 2 * n * (delay - k)), 0.0)
    return np.exp(-2j * np.pi * np.mod(phase, 1.0))


def doppler_diagonal(doppler: float, n: int) -> np.ndarray:
    return np.exp(-2j * np.pi * doppler * np.arange(n) / n)


def time_domain_path_matrix(path: ChannelPath, params: AfdmParams) -> np.ndarray:
    """``h * Gamma_cpp * Delta_nu * Pi^l`` for a single path."""
    n = params.n
    if path.delay >= n:
        raise ValueError("path delay must be smaller than n")
    shift = np.roll(np.eye(n), path.delay, axis=0)
    diag = cpp_matrix_diagonal(path.delay, params) * doppler_diagonal(path.doppler, n)
    return path.gain * diag[:, None] * shift


def time_domain_matrix(realization: ChannelRealization, params: AfdmParams) -> np.ndarray:
    return sum(time_domain_path_matrix(p, params) for p in realization.paths)


def apply_channel(s: np.ndarray, realization: ChannelRealization, params: AfdmParams,
                  n0: float = 0.0, rng=None) -> np.ndarray:
    """Pass a prefixed time-domain block through the channel and add AWGN.

    Sample ``i`` of the block sits at time ``i - n_cpp`` relative to the
    start of the useful part; samples before the block start are zero.
    The output keeps the input length (the delay tail is dropped).
    """
    s = np.asarray(s, dtype=complex)
    total = params.n + params.n_cpp
    if s.shape[-1] != total:
        raise ValueError(f"prefixed block must have length {total}, got {s.shape[-1]}")
    if realization.max_delay > params.n_cpp:
        raise ValueError("channel delay exceeds the prefix length")
    t = np.arange(total) - params.n_cpp
    out = np.zeros(s.shape, dtype=complex)
    for p in realization.paths:
        shifted = np.zeros_like(s)
        shifted[..., p.delay:] = s[..., :total - p.delay]
        out += p.gain * np.exp(-2j * np.pi * p.doppler * t / params.n) * shifted
    if n0 > 0:
        rng = _as_generator(rng)
        out += np.sqrt(n0 / 2) * (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape))
    return out


# ---------------------------------------------------------------------------
# DAFT-domain effective channel
# ---------------------------------------------------------------------------

def effective_matrix_direct(realization: ChannelRealization, params: AfdmParams) -> np.ndarray:
    """``A (sum_p H_p) A^H`` by explicit conjugation."""
    a = daft_matrix(params)
    return a @ time_domain_matrix(realization, params) @ a.conj().T


def _dirichlet(x: np.ndarray, n: int) -> np.ndarray:
    """``sum_{k<n} exp(-2j*pi*k*x/n)`` for real ``x``, stable near multiples of n."""
    xr = x - n * np.rint(x / n)
    out = np.full(xr.shape, complex(n))
    nz = xr != 0
    out[nz] = np.expm1(-2j * np.pi * xr[nz]) / np.expm1(-2j * np.pi * xr[nz] / n)
    return out


def band_center(path: ChannelPath, params: AfdmParams) -> int:
    """Column offset (mod n) where a path's DAFT-domain energy peaks."""
    # round half up: half-integer shifts of distinct Dopplers must not share a centre
    return int(np.floor(path.alpha + 2 * params.n * params.c1 * path.delay + 0.5)) % params.n


def band_mask(path: ChannelPath, params: AfdmParams, k_nu: int) -> np.ndarray:
    """Boolean n x n mask of entries within ``k_nu`` (cyclically) of the band centre."""
    n = params.n
    rows = np.arange(n)[:, None]
    cols = np.arange(n)[None, :]
    d = (cols - rows - band_center(path, params)) % n
    return np.minimum(d, n - d) <= k_nu


def path_effective_matrix(path: ChannelPath, params: AfdmParams,
                          k_nu: int | None = None) -> np.ndarray:
    """Unit-gain DAFT-domain matrix of one path from the closed form.

    Entry ``[n, m] = eta * gamma / N``; with ``k_nu`` set, entries outside the
    cyclic band of half-width ``k_nu`` are zeroed. Results are cached and
    returned read-only.
    """
    return _path_matrix_cached(params, path.delay, float(path.doppler), k_nu)


@lru_cache(maxsize=4096)
def _path_matrix_cached(params: AfdmParams, delay: int, doppler: float,
                        k_nu: int | None) -> np.ndarray:
    path = ChannelPath(1.0, delay, doppler)
    n = params.n
    rows = np.arange(n, dtype=float)[:, None]
    cols = np.arange(n, dtype=float)[None, :]
    l = path.delay
    eta_phase = params.c1 * l * l - cols * l / n + params.c2 * (cols * cols - rows * rows)
    eta = np.exp(2j * np.pi * np.mod(eta_phase, 1.0))
    x = rows - cols + path.doppler + 2 * n * params.c1 * l
    h = eta * _dirichlet(x, n) / n
    if k_nu is not None and 2 * k_nu + 1 < n:
        h = np.where(band_mask(path, params, k_nu), h, 0.0)
    h.setflags(write=False)
    return h


def path_effective_matrices(realization: ChannelRealization, params: AfdmParams,
                            k_nu: int | None = None) -> np.ndarray:
    """Stack of unit-gain per-path matrices, shape ``(P, n, n)``."""
    return np.stack([path_effective_matrix(p, params, k_nu) for p in realization.paths])


def effective_matrix_closed_form(realization: ChannelRealization, params: AfdmParams,
                                 k_nu: int | None = None) -> np.ndarray:
    """``sum_p h_p H_p`` from the closed-form entries (optionally band-truncated)."""
    mats = path_effective_matrices(realization, params, k_nu)
    return np.tensordot(realization.gains, mats, axes=1)


def band_overlap_count(realization: ChannelRealization, params: AfdmParams, k_nu: int) -> int:
    """Number of matrix entries claimed by more than one path's band."""
    masks = np.stack([band_mask(p, params, k_nu) for p in realization.paths])
    return int(np.count_nonzero(masks.sum(axis=0) > 1))
