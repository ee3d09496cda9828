"""Seeded bit interleavers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Interleaver:
    permutation: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=np.int64)
        if not np.array_equal(np.sort(perm), np.arange(len(perm))):
            raise ValueError("permutation must be a bijection on 0..n-1")
        perm.setflags(write=False)
        object.__setattr__(self, "permutation", perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        inv.setflags(write=False)
        object.__setattr__(self, "inverse", inv)

    @classmethod
    def random(cls, length: int, seed: int) -> "Interleaver":
        return cls(np.random.default_rng(seed).permutation(length), seed)

    @classmethod
    def identity(cls, length: int) -> "Interleaver":
        return cls(np.arange(length))

    @classmethod
    def for_user(cls, length: int, user: int, run_seed: int) -> "Interleaver":
        """User-specific permutation seeded with ``user XOR run_seed``."""
        return cls.random(length, int(user) ^ int(run_seed))

    def __len__(self):
        return len(self.permutation)


def interleave(x: np.ndarray, interleaver: Interleaver) -> np.ndarray:
    """``out[i] = x[perm[i]]`` along the last axis."""
    x = np.asarray(x)
    if x.shape[-1] != len(interleaver):
        raise ValueError(f"length {x.shape[-1]} does not match interleaver length {len(interleaver)}")
    return x[..., interleaver.permutation]


def deinterleave(x: np.ndarray, interleaver: Interleaver) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != len(interleaver):
        raise ValueError(f"length {x.shape[-1]} does not match interleaver length {len(interleaver)}")
    return x[..., interleaver.inverse]
