"""Experiment configuration (JSON) and derived system objects."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from ..afdm import AfdmParams, select_c1, select_c2
from ..channel import EvaProfile, PathProfile, uniform_profile
from ..coding.interleaver import Interleaver
from ..coding.ldpc import LdpcCode, default_code, read_alist
from ..detectors.oamp import OampConfig
from ..scma import (DEFAULT_INDICATOR, Allocation, Codebook, Direction, ScmaConfig,
                    alphabet_for, build_codebooks, downlink_signature, effective_signature,
                    uplink_signature)

DIRECTIONS = ("uplink", "downlink")
WAVEFORMS = ("afdm", "ofdm")
RECEIVERS = ("mpa", "two_stage", "oamp", "lmmse")
CONVENTIONS = ("per_user", "resource")


class ConfigError(ValueError):
    pass


@dataclass
class ChannelConfig:
    """Channel profile: ``uniform`` (equal-power paths) or ``eva``."""

    kind: str = "uniform"
    num_paths: int = 2
    delays: list[int] | None = None
    dopplers: list[float] | None = None
    nu_max: float = 0.0
    k_nu: int = 1

    def profile(self) -> PathProfile | EvaProfile:
        if self.kind == "uniform":
            return uniform_profile(self.num_paths, self.nu_max, self.delays, self.dopplers)
        if self.kind == "eva":
            return EvaProfile()
        raise ConfigError(f"unknown channel kind {self.kind!r}")


@dataclass
class ExperimentConfig:
    direction: str = "uplink"
    waveform: str = "afdm"
    receiver: str = "mpa"
    allocation: str = "interleaved"
    n: int = 8
    n_cpp: int | None = None
    c1: float | None = None
    c2: float | None = None
    m: int = 2
    indicator: list[list[int]] = field(default_factory=lambda: DEFAULT_INDICATOR.tolist())
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    code: str | None = None
    ebn0_grid_db: list[float] = field(default_factory=lambda: [0.0, 5.0, 10.0])
    ebn0_convention: str = "per_user"
    min_bit_errors: int = 200
    max_trials: int = 1_000_000
    batch_size: int = 200
    seed: int = 0
    threads: int = 1
    mpa_iterations: int = 10
    oamp_iterations: int = 10
    inner_iterations: int = 8
    damping: float = 0.25

    def __post_init__(self):
        if isinstance(self.channel, dict):
            self.channel = ChannelConfig(**self.channel)
        self.validate()

    def validate(self) -> None:
        errors = []
        if self.direction not in DIRECTIONS:
            errors.append(f"direction must be one of {DIRECTIONS}")
        if self.waveform not in WAVEFORMS:
            errors.append(f"waveform must be one of {WAVEFORMS}")
        if self.receiver not in RECEIVERS:
            errors.append(f"receiver must be one of {RECEIVERS}")
        if self.allocation not in ("localized", "interleaved"):
            errors.append("allocation must be localized or interleaved")
        if self.ebn0_convention not in CONVENTIONS:
            errors.append(f"ebn0_convention must be one of {CONVENTIONS}")
        if self.receiver == "oamp" and self.code is None:
            errors.append("the oamp receiver needs a code")
        if self.receiver == "oamp" and self.m != 4:
            errors.append("the oamp receiver supports QPSK (m=4) only")
        if self.receiver == "two_stage" and self.direction != "downlink":
            errors.append("two_stage is a downlink receiver")
        if self.waveform == "ofdm" and ((self.c1 or 0) != 0 or (self.c2 or 0) != 0):
            errors.append("ofdm forces c1 = c2 = 0")
        if not self.ebn0_grid_db:
            errors.append("ebn0_grid_db must be nonempty")
        if self.min_bit_errors < 1 or self.max_trials < 1 or self.batch_size < 1:
            errors.append("min_bit_errors, max_trials and batch_size must be positive")
        if self.threads < 1:
            errors.append("threads must be positive")
        k = len(self.indicator)
        if k == 0 or self.n % k:
            errors.append("n must be a multiple of the number of resources K")
        if errors:
            raise ConfigError("; ".join(errors))

    # -- (de)serialisation ---------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass
class System:
    """Everything a trial needs, derived once from a config."""

    config: ExperimentConfig
    scma: ScmaConfig
    params: AfdmParams
    codebook: Codebook
    z_sym: np.ndarray
    profile: PathProfile | EvaProfile
    code: LdpcCode | None
    interleavers: list[Interleaver] | None
    oamp: OampConfig | None

    @property
    def n_groups(self) -> int:
        return self.params.n // self.scma.k

    @property
    def n_vars(self) -> int:
        return self.z_sym.shape[1]

    @property
    def rate(self) -> float:
        return self.code.rate if self.code is not None else 1.0

    def n0(self, ebn0_db: float) -> float:
        """Noise variance for an Eb/N0 with unit energy per user symbol.

        ``per_user``: Eb = 1 / (log2 M * rate). ``resource`` additionally
        divides by the overload factor J/K. Prefix energy is excluded.
        """
        ebn0 = 10.0 ** (ebn0_db / 10.0)
        n0 = 1.0 / (self.scma.bits_per_symbol * self.rate * ebn0)
        if self.config.ebn0_convention == "resource":
            n0 /= self.scma.overload
        return n0


def _profile_delays(profile, n: int) -> list[int]:
    if isinstance(profile, EvaProfile):
        return list(profile.to_path_profile(n).delays)
    return list(profile.delays)


def _max_alpha(profile, n: int) -> int:
    if isinstance(profile, EvaProfile):
        nu = profile.nu_max
    elif profile.dopplers is not None:
        nu = max(abs(v) for v in profile.dopplers)
    else:
        nu = profile.nu_max
    return int(np.ceil(nu - 0.5)) if nu > 0.5 else 0


def build_system(config: ExperimentConfig) -> System:
    scma = ScmaConfig(np.array(config.indicator), config.m)
    profile = config.channel.profile()
    delays = _profile_delays(profile, config.n)
    n_cpp = max(delays) if config.n_cpp is None else config.n_cpp
    if config.waveform == "ofdm":
        c1 = c2 = 0.0
    else:
        uniq = np.unique(delays)
        gap = int(np.min(np.diff(uniq))) if len(uniq) > 1 else 1
        frac = isinstance(profile, EvaProfile) or profile.dopplers is None and profile.nu_max > 0 \
            or profile.dopplers is not None and any(v != round(v) for v in profile.dopplers)
        k_nu = config.channel.k_nu if frac else 0
        c1 = select_c1(_max_alpha(profile, config.n), k_nu, gap, config.n) if config.c1 is None else config.c1
        c2 = select_c2(config.n) if config.c2 is None else config.c2
    params = AfdmParams(config.n, c1, c2, n_cpp)
    alphabet = alphabet_for(config.m)
    if config.direction == "uplink":
        cb = build_codebooks(alphabet, scma, uplink_signature(scma), Direction.UPLINK)
    else:
        cb = build_codebooks(alphabet, scma, downlink_signature(), Direction.DOWNLINK)
    z_sym = effective_signature(cb.signature, Allocation(config.allocation), config.n)
    code = interleavers = oamp = None
    if config.code is not None:
        code = default_code() if config.code == "default" else LdpcCode(read_alist(config.code))
        interleavers = [Interleaver.for_user(code.frame_bits, j, config.seed) for j in range(scma.j)]
        oamp = OampConfig(config.oamp_iterations, config.damping, config.inner_iterations)
    return System(config, scma, params, cb, z_sym, profile, code, interleavers, oamp)
