"""Multiuser receivers."""

from .linear import (hard_bits_from_posteriors, lmmse_estimate, lmmse_estimate_direct,
                     lmmse_filter, two_stage_downlink)
from .messages import (GaussianMessage, extrinsic_combine, gaussian_from_llr,
                       gaussian_from_llr_qpsk, llr_from_gaussian, llr_from_gaussian_qpsk)
from .mpa import ComplexityError, SparseFactorGraph, brute_force_marginals, mpa_detect
from .oamp import OampConfig, OampResult, oamp_receive

__all__ = [
    "ComplexityError", "GaussianMessage", "OampConfig", "OampResult", "SparseFactorGraph",
    "brute_force_marginals", "extrinsic_combine", "gaussian_from_llr", "gaussian_from_llr_qpsk",
    "hard_bits_from_posteriors", "llr_from_gaussian", "llr_from_gaussian_qpsk",
    "lmmse_estimate", "lmmse_estimate_direct", "lmmse_filter", "mpa_detect", "oamp_receive",
    "two_stage_downlink",
]
