"""Seeded Monte Carlo sweeps over Eb/N0 and CSV output."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chains import BatchCounts, run_batch
from .config import ExperimentConfig, System, build_system

CSV_HEADER = ("ebn0_db", "ber", "bit_errors", "bits", "frame_errors", "frames")


@dataclass(frozen=True)
class BerPoint:
    ebn0_db: float
    bit_errors: int
    bits_simulated: int
    frame_errors: int
    frames: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_simulated if self.bits_simulated else float("nan")

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else float("nan")


def batch_rng(seed: int, point: int, batch: int) -> np.random.Generator:
    """Independent stream per (seed, point, batch); order of execution is irrelevant."""
    return np.random.default_rng([seed, point, batch])


def run_point(system: System, ebn0_db: float, point_index: int, threads: int = 1) -> BerPoint:
    """Simulate fixed-size batches until the error or trial budget is met.

    Batches are evaluated ``threads`` at a time but accumulated strictly in
    index order, and accumulation stops at the first batch that reaches the
    target, so the result does not depend on the thread count.
    """
    cfg = system.config
    n0 = system.n0(ebn0_db)
    n_batches = -(-cfg.max_trials // cfg.batch_size)
    sizes = [min(cfg.batch_size, cfg.max_trials - b * cfg.batch_size) for b in range(n_batches)]

    def work(b: int) -> BatchCounts:
        return run_batch(system, n0, sizes[b], batch_rng(cfg.seed, point_index, b))

    total = BatchCounts()
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        b = 0
        while b < n_batches:
            wave = list(range(b, min(b + max(threads, 1), n_batches)))
            results = list(pool.map(work, wave)) if pool else [work(i) for i in wave]
            for res in results:
                total += res
                b += 1
                if total.bit_errors >= cfg.min_bit_errors:
                    break
            if total.bit_errors >= cfg.min_bit_errors:
                break
    finally:
        if pool:
            pool.shutdown()
    return BerPoint(float(ebn0_db), total.bit_errors, total.bits, total.frame_errors, total.frames)


def run_sweep(config: ExperimentConfig, threads: int | None = None) -> list[BerPoint]:
    system = build_system(config)
    threads = config.threads if threads is None else threads
    return [run_point(system, e, i, threads) for i, e in enumerate(config.ebn0_grid_db)]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def emit_csv(points: list[BerPoint], path) -> None:
    if not points:
        raise ValueError("no points to write")
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in points:
            w.writerow([_fmt(p.ebn0_db), _fmt(p.ber), p.bit_errors, p.bits_simulated,
                        p.frame_errors, p.frames])


def read_csv(path) -> list[BerPoint]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [BerPoint(float(r["ebn0_db"]), int(r["bit_errors"]), int(r["bits"]),
                     int(r["frame_errors"]), int(r["frames"])) for r in rows]


def emit_series_csv(header: tuple[str, ...], rows, path) -> None:
    """Generic numeric CSV (SE traces, bounds) with 6 significant digits."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
