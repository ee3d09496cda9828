import numpy as np
import pytest

from afdm_scma.afdm import AfdmParams, add_cpp, daft_matrix, demodulate, remove_cpp, select_c1
from afdm_scma.channel import (ChannelPath, ChannelRealization, EvaProfile, apply_channel,
                               band_mask, band_overlap_count, effective_matrix_closed_form,
                               effective_matrix_direct, path_effective_matrix, sample_realization,
                               time_domain_matrix, time_domain_path_matrix, uniform_profile)


def _rand_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestPath:
    """Doppler split and validation."""

    @pytest.mark.parametrize("nu, alpha, beta", [(0.0, 0, 0.0), (0.5, 0, 0.5), (0.51, 1, -0.49),
                                                 (-0.5, -1, 0.5), (2.3, 2, 0.3), (-1.2, -1, -0.2)])
    def test_split(self, nu, alpha, beta):
        p = ChannelPath(1, 0, nu)
        assert p.alpha == alpha
        assert p.beta == pytest.approx(beta)
        assert -0.5 < p.beta <= 0.5

    def test_negative_delay(self):
        with pytest.raises(ValueError):
            ChannelPath(1, -1, 0)


class TestTimeDomain:
    """Per-path time-domain matrices and the physical channel."""

    def test_identity(self):
        p = AfdmParams(8, 0.1, 0.0, 2)
        np.testing.assert_allclose(time_domain_path_matrix(ChannelPath(1, 0, 0), p), np.eye(8))

    def test_cyclic_shift_without_chirp(self):
        p = AfdmParams(8, 0.0, 0.0, 2)
        h = time_domain_path_matrix(ChannelPath(1, 1, 0), p)
        np.testing.assert_allclose(h, np.roll(np.eye(8), 1, axis=0), atol=1e-15)

    def test_entrywise_formula(self):
        n, l, c1, nu = 8, 2, 0.15, 0.3
        p = AfdmParams(n, c1, 0.0, 3)
        h = time_domain_path_matrix(ChannelPath(0.7j, l, nu), p)
        for row in range(n):
            gamma = np.exp(-2j * np.pi * c1 * (n * n - 2 * n * (l - row))) if row < l else 1.0
            expected = 0.7j * gamma * np.exp(-2j * np.pi * nu * row / n)
            assert h[row, (row - l) % n] == pytest.approx(expected)
        assert np.count_nonzero(np.abs(h) > 0) == n

    def test_pure_doppler(self):
        p = AfdmParams(8, 0.0, 0.0, 1)
        h = time_domain_path_matrix(ChannelPath(1, 0, 0.5), p)
        np.testing.assert_allclose(h, np.diag(np.exp(-1j * np.pi * np.arange(8) / 8)), atol=1e-15)

    def test_single_static_path_passes_through(self):
        rng = np.random.default_rng(0)
        p = AfdmParams(16, 0.05, 0.0, 3)
        s = _rand_complex(rng, 19)
        out = apply_channel(s, ChannelRealization((ChannelPath(1, 0, 0),)), p)
        np.testing.assert_allclose(out, s)

    def test_prefix_makes_channel_circulant(self):
        rng = np.random.default_rng(1)
        p = AfdmParams(32, 3 / 64, 0.001, 4)
        r = ChannelRealization.from_arrays(_rand_complex(rng, 3), [0, 2, 4], [0.3, -1.0, 1.7])
        s = _rand_complex(rng, 32)
        out = remove_cpp(apply_channel(add_cpp(s, p), r, p), p)
        np.testing.assert_allclose(out, time_domain_matrix(r, p) @ s, atol=1e-9)

    def test_noise_variance(self):
        p = AfdmParams(64, 0.0, 0.0, 4)
        r = ChannelRealization((ChannelPath(1, 0, 0),))
        out = apply_channel(np.zeros((1600, 68)), r, p, n0=0.3, rng=2)
        assert np.var(out) == pytest.approx(0.3, rel=0.02)

    def test_delay_beyond_prefix(self):
        p = AfdmParams(8, 0, 0, 1)
        with pytest.raises(ValueError):
            apply_channel(np.zeros(9), ChannelRealization((ChannelPath(1, 2, 0),)), p)


class TestEffectiveMatrix:
    """DAFT-domain effective channel by conjugation and in closed form."""

    def test_identity(self):
        p = AfdmParams(8, 0.2, 0.01, 1)
        r = ChannelRealization((ChannelPath(1, 0, 0),))
        np.testing.assert_allclose(effective_matrix_direct(r, p), np.eye(8), atol=1e-12)

    def test_ofdm_one_tap(self):
        p = AfdmParams.ofdm(16, 3)
        r = ChannelRealization((ChannelPath(1, 3, 0),))
        expected = np.diag(np.exp(-2j * np.pi * np.arange(16) * 3 / 16))
        np.testing.assert_allclose(effective_matrix_direct(r, p), expected, atol=1e-12)

    def test_integer_doppler_one_entry_per_row(self):
        rng = np.random.default_rng(3)
        p = AfdmParams(16, select_c1(2, 0, 1, 16), 0.002, 3)
        r = ChannelRealization.from_arrays(_rand_complex(rng, 2), [0, 2], [1, -2])
        h = effective_matrix_closed_form(r, p, k_nu=0)
        for path in r.paths:
            single = path_effective_matrix(path, p, 0)
            assert np.all(np.count_nonzero(np.abs(single) > 1e-12, axis=1) == 1)
        np.testing.assert_allclose(h, effective_matrix_direct(r, p), atol=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_fractional_untruncated_matches(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 65))
        p = AfdmParams(n, rng.uniform(0, 1), rng.uniform(0, 1), min(n - 1, 6))
        delays = rng.choice(min(n - 1, 6) + 1, 3, replace=False)
        r = ChannelRealization.from_arrays(_rand_complex(rng, 3), delays, rng.uniform(-3, 3, 3))
        np.testing.assert_allclose(effective_matrix_closed_form(r, p, k_nu=n - 1),
                                   effective_matrix_direct(r, p), atol=1e-9)

    def test_band_energy_capture(self):
        n = 64
        p = AfdmParams(n, select_c1(0, 1, 1, n), 0.0, 2)
        path = ChannelPath(1, 1, 0.05)
        full = path_effective_matrix(path, p)
        band = path_effective_matrix(path, p, 1)
        ratio = np.sum(np.abs(band) ** 2, axis=1) / np.sum(np.abs(full) ** 2, axis=1)
        assert ratio.min() >= 0.95

    def test_demodulated_signal_matches_effective_matrix(self):
        rng = np.random.default_rng(4)
        p = AfdmParams(16, 5 / 32, 0.001, 3)
        r = ChannelRealization.from_arrays(_rand_complex(rng, 2), [0, 3], [0.4, -1.3])
        x = _rand_complex(rng, 16)
        s = add_cpp(daft_matrix(p).conj().T @ x, p)
        y = demodulate(remove_cpp(apply_channel(s, r, p), p), p)
        np.testing.assert_allclose(y, effective_matrix_closed_form(r, p) @ x, atol=1e-9)


class TestBands:
    """Separation of per-path bands."""

    def test_fig4_like_configuration(self):
        # N=12, l = (0, 1), k_nu = 1: bands centred on 0 and 3 do not overlap
        p = AfdmParams(12, select_c1(0, 1, 1, 12), 0.0, 1)
        r = ChannelRealization.from_arrays([1, 1], [0, 1], [0.05, 0.0])
        assert band_overlap_count(r, p, 1) == 0
        h = effective_matrix_direct(r, p)
        outside = ~(band_mask(r.paths[0], p, 1) | band_mask(r.paths[1], p, 1))
        inside = np.sum(np.abs(h[~outside]) ** 2)
        assert inside / np.sum(np.abs(h) ** 2) > 0.95

    def test_undersized_chirp_overlaps(self):
        p = AfdmParams(16, 1 / 64, 0.0, 1)
        r = ChannelRealization.from_arrays([1, 1], [0, 1], [1.0, 0.0])
        assert band_overlap_count(r, p, 1) > 0

    def test_half_integer_shift_keeps_dopplers_apart(self):
        # delay gap 2 puts the l=1 band at a half-integer shift; Dopplers 0 and 1 stay distinct
        p = AfdmParams(32, select_c1(2, 0, 2, 32), 0.0, 3)
        r = ChannelRealization.from_arrays(np.ones(4), [1, 1, 3, 3], [0, 1, 0, 1])
        assert band_overlap_count(r, p, 0) == 0


class TestSampling:
    """Random realizations and the EVA profile."""

    def test_uniform_gain_variance(self):
        p = AfdmParams(8, 0, 0, 1)
        prof = uniform_profile(2)
        rng = np.random.default_rng(5)
        g = np.array([sample_realization(prof, rng, p).gains for _ in range(20000)])
        np.testing.assert_allclose(np.mean(np.abs(g) ** 2, axis=0), 0.5, rtol=0.03)

    def test_zero_doppler(self):
        r = sample_realization(uniform_profile(3), 1, AfdmParams(8, 0, 0, 2))
        assert np.all(r.dopplers == 0)

    def test_cosine_doppler_bounded(self):
        r = sample_realization(uniform_profile(3, nu_max=1.5), 2, AfdmParams(8, 0, 0, 2))
        assert np.all(np.abs(r.dopplers) <= 1.5)

    def test_deterministic(self):
        p = AfdmParams(8, 0, 0, 2)
        a = sample_realization(uniform_profile(3, 1.0), 7, p)
        b = sample_realization(uniform_profile(3, 1.0), 7, p)
        assert a == b

    def test_profile_exceeds_prefix(self):
        with pytest.raises(ValueError):
            sample_realization(uniform_profile(3), 0, AfdmParams(8, 0, 0, 1))

    def test_eva_quantization(self):
        eva = EvaProfile()
        np.testing.assert_array_equal(eva.quantized_delays(128), [0, 0, 0, 1, 1, 1, 2, 3, 5])
        # the 0/2/5/.../39 set corresponds to a 15.36 MHz sample rate
        np.testing.assert_array_equal(eva.quantized_delays(1024), [0, 0, 2, 5, 6, 11, 17, 27, 39])

    def test_eva_merge_and_normalisation(self):
        prof = EvaProfile().to_path_profile(128)
        assert prof.delays == (0, 1, 2, 3, 5)
        assert sum(prof.powers) == pytest.approx(1.0)
        lin = 10 ** (np.array(EvaProfile().tap_powers_db) / 10)
        assert prof.powers[0] == pytest.approx(lin[:3].sum() / lin.sum())

    def test_eva_doppler(self):
        eva = EvaProfile()
        assert eva.nu_max == pytest.approx(1100 / 15000)
        assert eva.doppler_from_speed_hz() == pytest.approx(1112, rel=0.01)
        r = sample_realization(eva, 0, AfdmParams(128, 0, 0, 24))
        assert len(r.paths) == 5
