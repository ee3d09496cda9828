import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from afdm_scma.coding import (Interleaver, LdpcCode, decode, deinterleave, default_code, encode,
                              extract_info, gf2_rank, interleave, peg_staircase, read_alist,
                              write_alist)
from afdm_scma.detectors.messages import GaussianMessage, llr_from_gaussian_qpsk
from afdm_scma.detectors.oamp import qpsk_modulate_bits


@pytest.fixture(scope="module")
def code():
    return default_code()


def _bitwise_map(llr, h):
    """Exact bit APP LLRs by enumerating every codeword of a small code."""
    n = h.shape[1]
    words = np.array([w for w in itertools.product((0, 1), repeat=n) if not np.any(h @ w % 2)])
    logp = -(words * llr).sum(axis=1)  # log P(word) up to a constant, LLR = log P0/P1
    p = np.exp(logp - logp.max())
    p1 = (p[:, None] * words).sum(0)
    p0 = p.sum() - p1
    return np.log(p0 / p1)


class TestAlist:
    """Text round trip of parity-check matrices."""

    def test_roundtrip(self, tmp_path):
        h = peg_staircase(40, 16, 3, seed=0)
        write_alist(h, tmp_path / "c.alist")
        back = read_alist(tmp_path / "c.alist")
        assert (back != h).nnz == 0

    def test_parse_from_text(self):
        text = "4 2\n2 2\n1 1 1 1\n2 2\n1 0\n1 0\n2 0\n2 0\n1 2\n3 4\n"
        np.testing.assert_array_equal(read_alist(text).toarray(), [[1, 1, 0, 0], [0, 0, 1, 1]])


class TestCode:
    """Encoder and the shipped code."""

    def test_default_dimensions(self, code):
        assert code.frame_bits == 2048
        assert code.info_bits == 1365
        assert code.rate == pytest.approx(2 / 3, abs=1e-3)

    def test_staircase_full_rank(self):
        h = peg_staircase(60, 20, 3, seed=4)
        assert gf2_rank(h.toarray()) == 20

    def test_peg_girth_at_least_six(self, code):
        # no two columns share two checks
        h = code.parity_check.astype(np.int64)
        overlap = (h.T @ h).tocoo()
        off = overlap.row != overlap.col
        assert overlap.data[off].max() <= 1

    def test_encode_satisfies_parity(self, code):
        u = np.random.default_rng(0).integers(0, 2, (5, code.info_bits))
        cw = encode(u, code)
        assert np.all(code.is_codeword(cw))
        np.testing.assert_array_equal(extract_info(cw, code), u)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 20))
    def test_linearity(self, seed):
        c = LdpcCode(peg_staircase(30, 12, 3, seed=1))
        rng = np.random.default_rng(seed)
        a, b = rng.integers(0, 2, (2, c.info_bits))
        np.testing.assert_array_equal(encode(a ^ b, c), encode(a, c) ^ encode(b, c))

    def test_wrong_length(self, code):
        with pytest.raises(ValueError):
            encode(np.zeros(10), code)
        with pytest.raises(ValueError):
            decode(np.zeros(10), code)

    def test_rank_deficient_matrix(self):
        h = np.array([[1, 1, 0, 0], [0, 1, 1, 0], [1, 0, 1, 0]])
        c = LdpcCode(sparse.csr_matrix(h))
        assert c.rank == 2 and c.info_bits == 2
        assert np.all(c.is_codeword(encode(np.array([[1, 0], [1, 1]]), c)))


class TestDecoder:
    """Sum-product decoding."""

    def test_single_parity_check_is_exact(self):
        # one check: the Tanner graph is a tree and one iteration is exact
        h = np.ones((1, 5), dtype=int)
        c = LdpcCode(sparse.csr_matrix(h))
        llr = np.array([1.2, -0.4, 2.5, 0.3, -3.0])
        res = decode(llr, c, 1, early_stop=False)
        np.testing.assert_allclose(res.aposteriori, _bitwise_map(llr, h), atol=1e-9)
        np.testing.assert_allclose(res.extrinsic, res.aposteriori - llr)

    def test_tree_code_is_exact(self):
        h = np.array([[1, 1, 1, 0, 0, 0, 0], [0, 0, 1, 1, 1, 0, 0], [0, 0, 0, 0, 1, 1, 1]])
        c = LdpcCode(sparse.csr_matrix(h))
        llr = np.random.default_rng(2).normal(1, 1.5, 7)
        res = decode(llr, c, 5, early_stop=False)
        np.testing.assert_allclose(res.aposteriori, _bitwise_map(llr, h), atol=1e-8)

    def test_small_loopy_code_agrees_with_map_decisions(self):
        h = peg_staircase(12, 6, 3, seed=3).toarray()
        c = LdpcCode(sparse.csr_matrix(h))
        rng = np.random.default_rng(4)
        agree = flipped = 0
        for _ in range(300):
            # consistent Gaussian LLRs of the all-zero word, mean 4
            llr = rng.normal(4, np.sqrt(8), 12)
            flipped += np.any(llr < 0)
            res = decode(llr, c, 20)
            agree += np.array_equal(res.hard_bits, (_bitwise_map(llr, h) < 0).astype(np.int8))
        assert flipped > 150
        assert agree >= 270

    def test_codeword_input_stops_early(self, code):
        llr = 10 * (1 - 2 * encode(np.zeros(code.info_bits, int), code).astype(float))
        res = decode(llr, code, 8)
        assert res.converged and res.iterations == 1

    def test_waterfall(self, code):
        rng = np.random.default_rng(5)
        ber = []
        for ebn0_db in (1.0, 4.0):
            tau = 1 / (2 * code.rate * 10 ** (ebn0_db / 10))
            cw = encode(rng.integers(0, 2, (20, code.info_bits)), code)
            s = qpsk_modulate_bits(cw)
            r = s + np.sqrt(tau / 2) * (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape))
            res = decode(llr_from_gaussian_qpsk(GaussianMessage(r, np.full(r.shape, tau))), code, 8)
            ber.append(np.mean(res.hard_bits != cw))
        assert ber[0] > 1e-2
        assert ber[1] < 1e-4


class TestInterleaver:
    """Seeded permutations."""

    def test_roundtrip(self):
        il = Interleaver.random(100, 3)
        x = np.arange(100) * 1.5
        np.testing.assert_array_equal(deinterleave(interleave(x, il), il), x)

    def test_user_seeds_differ(self):
        a = Interleaver.for_user(64, 0, 7)
        b = Interleaver.for_user(64, 1, 7)
        assert not np.array_equal(a.permutation, b.permutation)
        assert a.seed == 7 and b.seed == 6

    def test_deterministic(self):
        np.testing.assert_array_equal(Interleaver.for_user(64, 2, 9).permutation,
                                      Interleaver.for_user(64, 2, 9).permutation)

    def test_not_a_permutation(self):
        with pytest.raises(ValueError):
            Interleaver(np.array([0, 0, 1]))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            interleave(np.zeros(5), Interleaver.identity(4))
