"""Tests for QC-LDPC construction, systematic encoding and sum-product decoding."""

import numpy as np
import numpy.testing as npt
import pytest

from utils.helpers import bpsk_ber, db_to_linear
from zakotfs.ldpc import (FLOODING, LAYERED, LLR_CLIP, CodeConstructionError, code_from_alist, code_from_matrix,
                          construct_code, decode_layered_bp, encode, gf2_rref, has_four_cycles, lift, read_alist,
                          syndrome, write_alist)


def _bpsk_llrs(codeword, ebn0_db, rate, rng):
    N0 = 1.0 / (rate * float(db_to_linear(ebn0_db)))
    y = 1.0 - 2.0 * codeword + np.sqrt(N0 / 2) * rng.standard_normal(codeword.size)
    return 4.0 * y / N0


class TestConstruction:

    def test_dimensions(self, small_code):
        assert small_code.n == 444
        assert small_code.k == 222
        assert small_code.m == 222
        assert small_code.rate == pytest.approx(0.5)
        assert small_code.exponents.shape == (6, 12)

    def test_degrees(self, small_code):
        H = small_code.H
        npt.assert_array_equal(H.sum(axis=0), 3)
        npt.assert_array_equal(H.sum(axis=1), 6)

    def test_girth_above_four(self, small_code):
        assert not has_four_cycles(small_code.exponents, small_code.lifting)

    def test_qc_matrix_is_lifted_exponents(self, small_code):
        npt.assert_array_equal(small_code.H_qc, lift(small_code.exponents, small_code.lifting))

    def test_rank_deficiency_frozen(self, small_code):
        assert small_code.rank <= small_code.m - 2
        assert small_code.num_frozen == small_code.n - small_code.rank - small_code.k
        assert small_code.num_frozen >= 2

    def test_layers_cover_every_variable(self, small_code):
        for layer in small_code.layers:
            npt.assert_array_equal(np.sort(layer.ravel()), np.arange(small_code.n))

    def test_deterministic(self, small_code):
        again = construct_code(seed=0, lifting=37)
        npt.assert_array_equal(again.exponents, small_code.exponents)
        assert again.seed == small_code.seed

    def test_invalid_lifting(self):
        with pytest.raises(ValueError):
            construct_code(lifting=1)

    def test_rejects_unlayered_matrix(self):
        H = np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]], dtype=np.uint8)
        with pytest.raises(CodeConstructionError):
            code_from_matrix(H, 1)

    def test_describe(self, small_code):
        info = small_code.describe()
        assert info['n'] == 444 and info['lifting'] == 37


class TestGf2:

    def test_rref_of_random_matrix(self, rng):
        H = rng.integers(0, 2, size=(20, 37)).astype(np.uint8)
        rref, pivots = gf2_rref(H)
        npt.assert_array_equal(rref[:, pivots], np.eye(pivots.size, dtype=np.uint8))

    def test_rref_spans_rows(self, rng):
        H = rng.integers(0, 2, size=(6, 10)).astype(np.uint8)
        H[5] = H[0] ^ H[1]
        rref, pivots = gf2_rref(H)
        assert pivots.size <= 5
        # every original row is a GF(2) combination of the rref rows
        for row in H:
            residual = row.copy()
            for r, col in zip(rref, pivots):
                if residual[col]:
                    residual ^= r
            assert not residual.any()


class TestEncoding:

    def test_codewords_satisfy_checks(self, small_code, rng):
        for _ in range(20):
            codeword = encode(small_code, rng.integers(0, 2, size=small_code.k))
            assert not syndrome(small_code, codeword).any()

    def test_systematic_layout(self, small_code, rng):
        info = rng.integers(0, 2, size=small_code.k)
        codeword = encode(small_code, info)
        npt.assert_array_equal(codeword[:small_code.k], info)
        assert not codeword[small_code.k:small_code.n - small_code.rank].any()

    def test_generator_orthogonal_to_checks(self, small_code):
        G = small_code.generator().astype(np.int64)
        assert not ((G @ small_code.H.T.astype(np.int64)) % 2).any()

    def test_generator_matches_encoder(self, small_code, rng):
        info = rng.integers(0, 2, size=small_code.k)
        npt.assert_array_equal((info @ small_code.generator().astype(np.int64)) % 2, encode(small_code, info))

    def test_wrong_length(self, small_code):
        with pytest.raises(ValueError):
            encode(small_code, np.zeros(10))


class TestDecoding:

    @pytest.mark.parametrize('schedule', [LAYERED, FLOODING])
    def test_clean_codeword(self, small_code, rng, schedule):
        codeword = encode(small_code, rng.integers(0, 2, size=small_code.k))
        result = decode_layered_bp(small_code, 10.0 * (1 - 2.0 * codeword), schedule=schedule)
        assert result.converged
        assert result.iterations == 1
        npt.assert_array_equal(result.bits, codeword)

    @pytest.mark.parametrize('schedule', [LAYERED, FLOODING])
    def test_corrects_weak_errors(self, small_code, rng, schedule):
        codeword = encode(small_code, rng.integers(0, 2, size=small_code.k))
        llrs = 4.0 * (1 - 2.0 * codeword)
        flipped = rng.choice(small_code.k, size=5, replace=False)
        llrs[flipped] = -0.5 * llrs[flipped]
        result = decode_layered_bp(small_code, llrs, schedule=schedule)
        assert result.converged
        npt.assert_array_equal(result.bits, codeword)

    def test_layered_converges_no_slower_than_flooding(self, small_code, rng):
        iterations = {LAYERED: 0, FLOODING: 0}
        for _ in range(50):
            codeword = encode(small_code, rng.integers(0, 2, size=small_code.k))
            llrs = _bpsk_llrs(codeword, 2.5, small_code.rate, rng)
            for schedule in iterations:
                iterations[schedule] += decode_layered_bp(small_code, llrs, max_iters=50, schedule=schedule).iterations
        assert iterations[LAYERED] <= iterations[FLOODING]

    def test_frozen_bits_forced(self, small_code):
        llrs = np.full(small_code.n, 5.0)
        llrs[small_code.k:small_code.n - small_code.rank] = -LLR_CLIP
        result = decode_layered_bp(small_code, llrs)
        assert result.converged
        assert not result.bits.any()

    def test_reports_non_convergence(self, small_code, rng):
        result = decode_layered_bp(small_code, rng.standard_normal(small_code.n) * 0.01, max_iters=2)
        assert not result.converged
        assert result.iterations == 2

    def test_invalid_inputs(self, small_code):
        with pytest.raises(ValueError):
            decode_layered_bp(small_code, np.zeros(5))
        with pytest.raises(ValueError):
            decode_layered_bp(small_code, np.zeros(small_code.n), schedule='random')

    def test_coded_beats_uncoded_bpsk(self, small_code, rng):
        ebn0_db = 3.5
        errors = total = 0
        for _ in range(100):
            info = rng.integers(0, 2, size=small_code.k)
            codeword = encode(small_code, info)
            result = decode_layered_bp(small_code, _bpsk_llrs(codeword, ebn0_db, small_code.rate, rng))
            errors += np.count_nonzero(result.bits[:small_code.k] != info)
            total += small_code.k
        assert errors / total < float(bpsk_ber(ebn0_db)) / 10

    @pytest.mark.slow
    def test_waterfall_full_length(self):
        code = construct_code(seed=0)
        rng = np.random.default_rng(5)
        frame_errors = 0
        for _ in range(500):
            info = rng.integers(0, 2, size=code.k)
            codeword = encode(code, info)
            result = decode_layered_bp(code, _bpsk_llrs(codeword, 2.5, code.rate, rng), max_iters=50)
            frame_errors += int(np.any(result.bits[:code.k] != info))
        assert frame_errors / 500 < 1e-2


class TestAlist:

    def test_round_trip(self, small_code, tmp_path):
        path = write_alist(small_code, tmp_path / 'code.alist')
        npt.assert_array_equal(read_alist(path), small_code.H)
        header = path.read_text().splitlines()[:2]
        assert header == ['444 222', '3 6']

    def test_rebuilt_code(self, small_code, tmp_path):
        rebuilt = code_from_alist(write_alist(small_code, tmp_path / 'code.alist'), small_code.lifting)
        assert (rebuilt.n, rebuilt.k, rebuilt.rank) == (small_code.n, small_code.k, small_code.rank)
        codeword = encode(rebuilt, np.ones(rebuilt.k, dtype=np.uint8))
        assert not syndrome(rebuilt, codeword).any()
