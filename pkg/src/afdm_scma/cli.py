"""Command-line entry point: ``afdm-scma {run,analyze,codebook}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .analysis import (build_nle_table, state_evolution, union_bound_ber,
                       uplink_pep_system, downlink_pep_system)
from .channel import ChannelRealization, EvaProfile
from .harness.chains import draw_effective_matrices
from .harness.config import ConfigError, ExperimentConfig, build_system
from .harness.sweep import emit_csv, emit_series_csv, run_sweep
from .scma import (Direction, ScmaConfig, alphabet_for, build_codebooks, downlink_signature,
                   med, optimize_signature, save_matrix_text, uplink_signature)

log = logging.getLogger("afdm_scma")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    return cfg.with_overrides(seed=args.seed, threads=args.threads)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    points = run_sweep(cfg)
    emit_csv(points, args.out)
    for p in points:
        log.info("Eb/N0 %.2f dB: BER %.3e (%d errors, %d frames)", p.ebn0_db, p.ber, p.bit_errors, p.frames)
    return 0


def _fixed_structure(system) -> ChannelRealization:
    prof = system.profile
    if isinstance(prof, EvaProfile) or prof.dopplers is None:
        raise ConfigError("the union bound needs a channel with fixed per-path Dopplers")
    return ChannelRealization.from_arrays(np.ones(prof.num_paths), prof.delays, prof.dopplers)


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    system = build_system(cfg)
    if args.kind == "bound":
        st = _fixed_structure(system)
        var = np.asarray(system.profile.powers)
        alphabet = system.codebook.alphabet
        if cfg.direction == "uplink":
            psys = uplink_pep_system([st] * system.scma.j, system.params, system.z_sym, alphabet,
                                     [var] * system.scma.j)
        else:
            psys = downlink_pep_system(st, system.params, system.z_sym, alphabet, var)
        n0 = [system.n0(e) for e in cfg.ebn0_grid_db]
        ub = union_bound_ber(psys, n0)
        emit_series_csv(("ebn0_db", "union_bound"), zip(map(float, cfg.ebn0_grid_db), map(float, ub)), args.out)
    else:
        if system.code is None:
            raise ConfigError("state evolution needs a code")
        table = build_nle_table(system.code, frames=args.frames, seed=cfg.seed)
        rng = np.random.default_rng(cfg.seed)
        mats = np.stack([draw_effective_matrices(system, rng, truncate=False)[0] for _ in range(args.blocks)])
        rows = []
        for e in cfg.ebn0_grid_db:
            tr = state_evolution(mats, system.n0(e), table, cfg.oamp_iterations)
            rows += [(float(e), i + 1, t, p, h) for i, (t, p, h) in enumerate(zip(tr.tau, tr.phi, tr.eta))]
        emit_series_csv(("ebn0_db", "iteration", "tau", "phi", "eta"), rows, args.out)
    return 0


def cmd_codebook(args) -> int:
    scma = ScmaConfig(m=args.m)
    alphabet = alphabet_for(args.m)
    if args.direction == "downlink":
        sig = optimize_signature(scma, alphabet, budget=args.budget, seed=args.seed or 0) \
            if args.budget > 0 else downlink_signature()
    else:
        sig = uplink_signature(scma)
    cb = build_codebooks(alphabet, scma, sig, Direction(args.direction))
    save_matrix_text(sig.z, args.out)
    print(json.dumps({"direction": args.direction, "med": med(sig, alphabet),
                      "codebook_med": med(cb.signature, alphabet)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afdm-scma", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True)
        p.add_argument("--threads", type=int, default=None)

    run = sub.add_parser("run", help="Monte Carlo BER sweep to CSV")
    common(run)
    run.set_defaults(func=cmd_run)

    ana = sub.add_parser("analyze", help="union bound or state evolution to CSV")
    common(ana)
    ana.add_argument("--kind", choices=("bound", "se"), default="bound")
    ana.add_argument("--frames", type=int, default=10, help="frames per decoder-table point")
    ana.add_argument("--blocks", type=int, default=32, help="channel draws averaged in the SE")
    ana.set_defaults(func=cmd_analyze)

    cb = sub.add_parser("codebook", help="build or optimise a signature and write it as text")
    common(cb, config=False)
    cb.add_argument("--direction", choices=("uplink", "downlink"), default="downlink")
    cb.add_argument("--m", type=int, default=4)
    cb.add_argument("--budget", type=int, default=0, help="MED evaluations for the optimiser")
    cb.set_defaults(func=cmd_codebook)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
