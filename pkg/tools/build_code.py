"""Regenerate the shipped LDPC parity-check matrix."""

from pathlib import Path

from afdm_scma.coding.ldpc import DEFAULT_CODE_FILE, peg_staircase, write_alist

if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "afdm_scma" / "coding" / "data" / DEFAULT_CODE_FILE
    write_alist(peg_staircase(2048, 683, info_degree=3, seed=2048), out)
    print(out)
