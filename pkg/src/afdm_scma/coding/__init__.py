"""LDPC coding and interleaving."""

from .interleaver import Interleaver, deinterleave, interleave
from .ldpc import (DecodeResult, LdpcCode, decode, default_code, encode, extract_info,
                   gf2_rank, peg_staircase, read_alist, write_alist)

__all__ = [
    "DecodeResult", "Interleaver", "LdpcCode", "decode", "deinterleave", "default_code",
    "encode", "extract_info", "gf2_rank", "interleave", "peg_staircase", "read_alist",
    "write_alist",
]
