"""End-to-end acceptance checks.

Each test prints one ``CRITERION n: PASS/FAIL`` line with the measured
quantity before asserting. The Monte Carlo criteria take several minutes.
"""

import itertools
import time

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from afdm_scma.afdm import (AfdmParams, daft_matrix, demodulate_fast, modulate_fast, select_c1,
                            select_c2)
from afdm_scma.analysis import build_nle_table, state_evolution, union_bound_ber, uplink_pep_system
from afdm_scma.channel import (ChannelRealization, band_overlap_count, effective_matrix_closed_form,
                               effective_matrix_direct)
from afdm_scma.detectors import (GaussianMessage, brute_force_marginals, extrinsic_combine,
                                 llr_from_gaussian, llr_from_gaussian_qpsk, lmmse_estimate,
                                 lmmse_estimate_direct, mpa_detect)
from afdm_scma.harness.chains import draw_effective_matrices, simulate_coded_frame
from afdm_scma.harness.config import ChannelConfig, ExperimentConfig, build_system
from afdm_scma.harness.sweep import emit_csv, run_point, run_sweep
from afdm_scma.scma import (ScmaConfig, bpsk_alphabet, build_codebooks, downlink_signature, med,
                            optimize_signature, qpsk_alphabet)

# MED of the default downlink signature over QPSK, frozen from the pdist enumeration
DOWNLINK_QPSK_MED = 1.06


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}")
    return emit


def _reliable(points, min_errors=200):
    return [p for p in points if p.bit_errors >= min_errors and p.ber > 0]


def _slope(points):
    """Decades of BER per 10 dB between the two highest reliable points."""
    a, b = _reliable(points)[-2:]
    return (np.log10(a.ber) - np.log10(b.ber)) / ((b.ebn0_db - a.ebn0_db) / 10)


def _crossing_db(points, target):
    """Eb/N0 where the log-BER curve crosses ``target`` (linear in dB); NaN if not bracketed."""
    pts = _reliable(points)
    for a, b in zip(pts, pts[1:]):
        if a.ber >= target > b.ber:
            t = (np.log10(a.ber) - np.log10(target)) / (np.log10(a.ber) - np.log10(b.ber))
            return a.ebn0_db + t * (b.ebn0_db - a.ebn0_db)
    return float("nan")


def _uncoded_uplink(**kw):
    base = dict(direction="uplink", waveform="afdm", receiver="mpa", allocation="interleaved",
                n=8, m=2, batch_size=2000, max_trials=200_000, min_bit_errors=200)
    base.update(kw)
    return ExperimentConfig(**base)


P2_CHANNEL = dict(num_paths=2, delays=[0, 1], dopplers=[0, 1])


@pytest.fixture(scope="module")
def p2_sweep():
    cfg = _uncoded_uplink(channel=ChannelConfig(**P2_CHANNEL), ebn0_grid_db=[8.0, 12.0, 16.0, 20.0],
                          seed=1)
    return cfg, run_sweep(cfg)


class TestTransform:
    """Criterion 1: unitarity and the OFDM special case."""

    def test_unitarity_and_ofdm_reduction(self, report):
        rng = np.random.default_rng(0)
        start = time.perf_counter()
        worst = 0.0
        for n in range(2, 257):
            for c1, c2 in rng.random((100, 2)):
                a = daft_matrix(AfdmParams(n, c1, c2))
                worst = max(worst, np.linalg.norm(a @ a.conj().T - np.eye(n)))
        exact = True
        for n in (2, 8, 64, 128, 256):
            p = AfdmParams(n, 0.0, 0.0)
            x = rng.standard_normal((4, n)) + 1j * rng.standard_normal((4, n))
            exact &= np.array_equal(modulate_fast(x, p), np.fft.ifft(x, norm="ortho"))
            exact &= np.array_equal(demodulate_fast(x, p), np.fft.fft(x, norm="ortho"))
        elapsed = time.perf_counter() - start
        ok = worst < 1e-10 and exact and elapsed < 60
        report(1, ok, f"max ||AA^H-I||_F={worst:.2e}, ofdm bit-exact={exact}, {elapsed:.1f}s")
        assert ok


class TestChannelOracle:
    """Criterion 2: closed-form DAFT-domain channel against direct conjugation."""

    def test_closed_form_matches_direct(self, report):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(50):
            n = int(rng.integers(4, 65))
            p = int(rng.integers(1, 4))
            delays = np.sort(rng.choice(min(n - 1, 8), p, replace=False))
            params = AfdmParams(n, float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.1)),
                                int(delays.max()))
            gains = (rng.standard_normal(p) + 1j * rng.standard_normal(p)) / np.sqrt(2 * p)
            r = ChannelRealization.from_arrays(gains, delays, rng.uniform(-2, 2, p))
            diff = effective_matrix_closed_form(r, params) - effective_matrix_direct(r, params)
            worst = max(worst, np.abs(diff).max())
        ok = worst < 1e-9
        report(2, ok, f"max entry error={worst:.2e} over 50 configurations")
        assert ok


class TestBandSeparation:
    """Criterion 3: disjoint path bands under the chirp-rate bound."""

    def test_no_overlap(self, report):
        rng = np.random.default_rng(2)
        total = 0
        done = 0
        while done < 50:
            n = int(rng.choice([16, 32, 64, 128]))
            p = int(rng.integers(2, 4))
            alpha_max = int(rng.integers(0, 3))
            delays = np.sort(rng.choice(8, p, replace=False))
            if (delays.max() + 1) * (2 * alpha_max + 1) > n:
                continue
            gap = int(np.diff(delays).min())
            params = AfdmParams(n, select_c1(alpha_max, 0, gap, n), select_c2(n), int(delays.max()))
            # every admissible integer Doppler at every delay, not just one draw
            combos = list(itertools.product(delays.tolist(), range(-alpha_max, alpha_max + 1)))
            r = ChannelRealization.from_arrays(np.ones(len(combos)), [c[0] for c in combos],
                                               [c[1] for c in combos])
            total += band_overlap_count(r, params, 0)
            done += 1
        ok = total == 0
        report(3, ok, f"overlapping entries={total} over 50 configurations")
        assert ok


class TestMpaExactness:
    """Criterion 4: MPA marginals against exhaustive enumeration."""

    def test_total_variation(self, report):
        rng = np.random.default_rng(3)
        a = bpsk_alphabet()
        z = build_codebooks(a, ScmaConfig(m=2), downlink_signature(), "downlink").signature
        params = AfdmParams(4, select_c1(1, 0, 1, 4), select_c2(4), 1)
        n0 = 1 / 10 ** 0.6
        start = time.perf_counter()
        worst = 0.0
        for _ in range(100):
            gain = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2)
            r = ChannelRealization.from_arrays([gain], [int(rng.integers(0, 2))], [int(rng.integers(-1, 2))])
            g = effective_matrix_closed_form(r, params) @ z
            y = g @ a[rng.integers(0, 2, 6)] + np.sqrt(n0 / 2) * (rng.standard_normal(4)
                                                                + 1j * rng.standard_normal(4))
            tv = 0.5 * np.abs(mpa_detect(y, g, a, n0, 10) - brute_force_marginals(y, g, a, n0)).sum(1)
            worst = max(worst, tv.max())
        elapsed = time.perf_counter() - start
        ok = worst < 1e-3 and elapsed < 120
        report(4, ok, f"max TV={worst:.2e} over 100 realizations, {elapsed:.1f}s")
        assert ok


class TestUnionBound:
    """Criterion 5: simulated uplink BER against the union bound."""

    def test_within_factor_two(self, p2_sweep, report):
        cfg, points = p2_sweep
        s = build_system(cfg)
        st = ChannelRealization.from_arrays([1, 1], P2_CHANNEL["delays"], P2_CHANNEL["dopplers"])
        system = uplink_pep_system([st] * s.scma.j, s.params, s.z_sym, s.codebook.alphabet)
        top = _reliable(points)[-2:]
        bound = union_bound_ber(system, [s.n0(p.ebn0_db) for p in top])
        ratios = [p.ber / b for p, b in zip(top, bound)]
        ok = len(top) == 2 and all(0.5 <= x <= 2.0 for x in ratios)
        detail = ", ".join(f"{p.ebn0_db:g} dB sim={p.ber:.3e} bound={b:.3e} ratio={x:.2f}"
                           for p, b, x in zip(top, bound, ratios))
        report(5, ok, detail)
        assert ok


class TestWaveformGain:
    """Criterion 6: AFDM needs less Eb/N0 than OFDM at BER 1e-3."""

    def test_gain_at_1e3(self, report):
        channel = ChannelConfig(num_paths=2, delays=[0, 4], dopplers=[1, 1])
        afdm = run_sweep(_uncoded_uplink(channel=channel, ebn0_grid_db=[10.0, 14.0, 18.0]))
        ofdm = run_sweep(_uncoded_uplink(waveform="ofdm", channel=channel,
                                         ebn0_grid_db=[18.0, 22.0, 26.0, 30.0]))
        x_afdm = _crossing_db(afdm, 1e-3)
        x_ofdm = _crossing_db(ofdm, 1e-3)
        gain = x_ofdm - x_afdm
        ok = bool(gain >= 4.0)
        report(6, ok, f"afdm {x_afdm:.2f} dB, ofdm {x_ofdm:.2f} dB, gain {gain:.2f} dB")
        assert ok


class TestDiversitySlope:
    """Criterion 7: high-SNR slope tracks the number of paths."""

    def test_slopes(self, p2_sweep, report):
        _, p2 = p2_sweep
        p1 = run_sweep(_uncoded_uplink(channel=ChannelConfig(num_paths=1, delays=[0], dopplers=[0]),
                                       ebn0_grid_db=[10.0, 15.0, 20.0, 25.0]))
        s2, s1 = _slope(p2), _slope(p1)
        ok = 1.5 <= s2 <= 2.5 and 0.7 <= s1 <= 1.3
        report(7, ok, f"P=2 slope {s2:.2f}, P=1 slope {s1:.2f} decades/10 dB")
        assert ok


class TestReceiverIdentities:
    """Criterion 8: LMMSE forms, extrinsic subtraction and LLR paths."""

    def test_identities(self, report):
        rng = np.random.default_rng(8)
        start = time.perf_counter()
        lmmse_err = 0.0
        for _ in range(20):
            g = rng.standard_normal((16, 24)) + 1j * rng.standard_normal((16, 24))
            prior = GaussianMessage(rng.standard_normal(24) + 1j * rng.standard_normal(24),
                                    rng.uniform(0.05, 2, 24))
            y = rng.standard_normal(16) + 1j * rng.standard_normal(16)
            n0 = float(rng.uniform(0.01, 1))
            a = lmmse_estimate(y, g, prior, n0)
            b = lmmse_estimate_direct(y, g, prior, n0)
            lmmse_err = max(lmmse_err, np.abs(a.mean - b.mean).max(), np.abs(a.variance - b.variance).max())

        prior = GaussianMessage(rng.standard_normal(1000) + 1j * rng.standard_normal(1000),
                                rng.uniform(1, 3, 1000))
        post = GaussianMessage(rng.standard_normal(1000) + 1j * rng.standard_normal(1000),
                               rng.uniform(0.05, 0.9, 1000))
        prev = GaussianMessage(np.zeros(1000), np.ones(1000))
        ext, _ = extrinsic_combine(post, prior, 1.0)
        ext_prev, _ = extrinsic_combine(post, prior, 1.0, prev)
        v = 1 / (1 / post.variance - 1 / prior.variance)
        subtraction = (np.array_equal(ext.mean, ext_prev.mean)
                       and np.array_equal(ext.variance, ext_prev.variance)
                       and np.allclose(ext.variance, v, rtol=1e-12, atol=0)
                       and np.allclose(ext.mean, v * (post.mean / post.variance - prior.mean / prior.variance),
                                       rtol=1e-12, atol=1e-12))

        msg = GaussianMessage(2 * (rng.standard_normal(10_000) + 1j * rng.standard_normal(10_000)),
                              rng.uniform(0.05, 5, 10_000))
        llr_err = np.abs(llr_from_gaussian_qpsk(msg) - llr_from_gaussian(msg, qpsk_alphabet())).max()
        elapsed = time.perf_counter() - start
        ok = lmmse_err < 1e-10 and subtraction and llr_err < 1e-9 and elapsed < 60
        report(8, ok, f"lmmse forms {lmmse_err:.1e}, kappa=1 subtraction exact={subtraction}, "
                      f"llr paths {llr_err:.1e}")
        assert ok


def _coded_config(**kw):
    base = dict(direction="uplink", receiver="oamp", code="default", n=64, m=4,
                channel=ChannelConfig(num_paths=2, delays=[0, 1], nu_max=1.0))
    base.update(kw)
    return ExperimentConfig(**base)


class TestCodedSystem:
    """Criterion 9: coded gain and agreement of the iterative receiver with its SE."""

    def test_coding_gain_at_8db(self, report):
        coded = build_system(_coded_config())
        n0 = coded.n0(8.0)
        errors = bits = 0
        for f in range(10):
            counts, _ = simulate_coded_frame(coded, n0, np.random.default_rng([9, f]))
            errors += counts.bit_errors
            bits += counts.bits
        coded_ber = errors / bits
        uncoded = run_point(build_system(_coded_config(receiver="lmmse", code=None, batch_size=200,
                                                       max_trials=20_000)), 8.0, 0)
        ok = uncoded.bit_errors >= 200 and coded_ber * 10 <= uncoded.ber
        report("9a", ok, f"coded BER {coded_ber:.2e} ({errors}/{bits}), "
                         f"uncoded LMMSE BER {uncoded.ber:.2e}")
        assert ok

    def test_mse_tracks_state_evolution(self, report):
        iterations = 6
        s = build_system(_coded_config(damping=1.0, oamp_iterations=iterations))
        # 6 dB keeps every iteration in the transient; later points only compare numerical floors
        n0 = s.n0(6.0)
        dec = []
        for f in range(50):
            _, res = simulate_coded_frame(s, n0, np.random.default_rng([10, f]), record_trace=True)
            dec.append([t.dec_mse for t in res.trace])
        dec = np.array(dec)
        rng = np.random.default_rng(11)
        mats = np.stack([draw_effective_matrices(s, rng, truncate=False)[0] for _ in range(256)])
        se = np.array(state_evolution(mats, n0, build_nle_table(s.code, frames=20, seed=1), iterations).phi)
        mean = dec.mean(axis=0)
        lo, hi = np.percentile(dec, [2.5, 97.5], axis=0)
        monotone = bool(np.all(np.diff(mean) <= 1e-12))
        inside = (se >= lo) & (se <= hi)
        ok = monotone and bool(inside.all())
        rows = "; ".join(f"it{i + 1} sim={m:.2e} se={p:.2e} band=[{a:.2e},{b:.2e}]"
                         for i, (m, p, a, b) in enumerate(zip(mean, se, lo, hi)))
        report("9b", ok, f"nonincreasing={monotone}, se in band={inside.tolist()} | {rows}")
        assert ok


class TestCodebookRegression:
    """Criterion 10: frozen MED and the optimiser's floor."""

    def test_med(self, report):
        sig = downlink_signature()
        a = qpsk_alphabet()
        pts = np.array([sig.z @ a[list(i)] for i in itertools.product(range(4), repeat=6)])
        oracle = float(pdist(np.hstack([pts.real, pts.imag])).min())
        value = med(sig, a)
        optimised = med(optimize_signature(budget=200, seed=0), a)
        ok = (abs(value - DOWNLINK_QPSK_MED) < 1e-9 and abs(oracle - DOWNLINK_QPSK_MED) < 1e-9
              and optimised >= DOWNLINK_QPSK_MED - 1e-12)
        report(10, ok, f"med={value:.12f} oracle={oracle:.12f} frozen={DOWNLINK_QPSK_MED} "
                       f"optimised={optimised:.6f}")
        assert ok


class TestDeterminism:
    """Criterion 11: identical CSV bytes regardless of thread count."""

    def test_thread_invariance(self, tmp_path, report):
        cfg = _uncoded_uplink(channel=ChannelConfig(**P2_CHANNEL), ebn0_grid_db=[4.0, 8.0, 12.0],
                              batch_size=100, max_trials=5000, seed=5)
        blobs = {}
        for threads in (1, 4, 8):
            path = tmp_path / f"t{threads}.csv"
            emit_csv(run_sweep(cfg, threads=threads), path)
            blobs[threads] = path.read_bytes()
        ok = blobs[1] == blobs[4] == blobs[8]
        report(11, ok, f"csv bytes identical across 1/4/8 threads={ok} ({len(blobs[1])} bytes)")
        assert ok
