import numpy as np
import numpy.testing as npt
import pytest

from utils.helpers import noise_psd, qam4_ber
from zakotfs.acquisition import build_H
from zakotfs.allocation import AllocationError, AllocationMap, qam4_modulate
from zakotfs.equalizer import (SINR_CAP, EqualizerOutput, SingularSystemError, hard_decisions, mmse_equalize,
                               qam4_llrs, zf_equalize)
from zakotfs.lattice import taps_from_items


def _full_map(params, count=None):
    count = params.size if count is None else count
    return AllocationMap('standard', params, np.arange(count), count)


def _complex_noise(rng, size, N0):
    return np.sqrt(N0 / 2) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


class TestMmse:

    def test_identity_channel(self, small_params, rng):
        size = small_params.size
        y = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        out = mmse_equalize(np.eye(size), y, 2.0, 0.5)
        npt.assert_allclose(out.x_hat, 2.0 / 2.5 * y)
        npt.assert_allclose(out.bias, 0.8)
        npt.assert_allclose(out.sinr, 4.0)

    def test_approaches_zero_forcing(self, small_params, rng):
        taps = taps_from_items(small_params, [((0, 0), 1.0), ((1, 1), 0.4), ((-1, 2), 0.3j)])
        H = build_H(taps, small_params)
        y = rng.standard_normal(small_params.size) + 1j * rng.standard_normal(small_params.size)
        npt.assert_allclose(mmse_equalize(H, y, 1.0, 1e-10).x_hat, zf_equalize(H, y), atol=1e-6)

    def test_residual_no_worse_than_zero_forcing(self, small_params, rng):
        taps = taps_from_items(small_params, [((0, 0), 1.0), ((1, 1), 0.8), ((-1, 2), 0.6j)])
        H = build_H(taps, small_params).H
        N0 = 0.1
        size = small_params.size
        mmse_error = zf_error = 0.0
        for _ in range(50):
            x = qam4_modulate(rng.integers(0, 2, size=2 * size))
            y = H @ x + _complex_noise(rng, size, N0)
            mmse_error += np.sum(np.abs(mmse_equalize(H, y, 1.0, N0).x_hat - x) ** 2)
            zf_error += np.sum(np.abs(zf_equalize(H, y) - x) ** 2)
        assert mmse_error <= zf_error

    def test_scale_invariance(self, small_params, rng):
        taps = taps_from_items(small_params, [((0, 0), 1.0), ((2, -1), 0.5)])
        H = build_H(taps, small_params).H
        y = rng.standard_normal(small_params.size) + 1j * rng.standard_normal(small_params.size)
        alpha = 3.0
        a = mmse_equalize(H, y, 1.0, 0.1)
        b = mmse_equalize(alpha * H, alpha * y, 1.0, 0.1 * alpha ** 2)
        npt.assert_allclose(b.x_hat, a.x_hat, atol=1e-10)
        npt.assert_allclose(b.bias, a.bias, atol=1e-10)

    def test_inactive_bins_zero(self, small_params, rng):
        size = small_params.size
        active = np.zeros(size, dtype=bool)
        active[:10] = True
        out = mmse_equalize(np.eye(size), np.ones(size), 1.0, 0.1, active)
        assert np.all(out.x_hat[10:] == 0)
        assert np.all(out.bias[10:] == 0)
        assert np.all(out.sinr[10:] == 0)
        assert np.all(out.x_hat[:10] != 0)

    def test_noise_free_sinr_infinite(self, small_params):
        out = mmse_equalize(np.eye(small_params.size), np.ones(small_params.size), 1.0, 0.0)
        assert np.all(np.isinf(out.sinr))
        npt.assert_allclose(out.x_hat, 1.0)

    def test_singular_noise_free_system(self, small_params):
        with pytest.raises(SingularSystemError):
            mmse_equalize(np.zeros((small_params.size, small_params.size)), np.ones(small_params.size), 1.0, 0.0)

    @pytest.mark.parametrize('E_T, N0', [(0.0, 1.0), (1.0, -0.1)])
    def test_invalid_parameters(self, small_params, E_T, N0):
        with pytest.raises(ValueError):
            mmse_equalize(np.eye(small_params.size), np.ones(small_params.size), E_T, N0)


class TestLlrs:

    def test_identity_llr_formula(self, small_params, rng):
        E_T, N0 = 2.0, 0.3
        y = rng.standard_normal(small_params.size) + 1j * rng.standard_normal(small_params.size)
        out = mmse_equalize(np.eye(small_params.size), y, E_T, N0)
        llrs = qam4_llrs(out, _full_map(small_params))
        scale = 2 * np.sqrt(2) * np.sqrt(E_T) / N0
        npt.assert_allclose(llrs[0::2], scale * y.real, rtol=1e-9)
        npt.assert_allclose(llrs[1::2], scale * y.imag, rtol=1e-9)

    def test_sign_convention(self, small_params, rng):
        bits = rng.integers(0, 2, size=2 * small_params.size)
        y = qam4_modulate(bits)
        out = mmse_equalize(np.eye(small_params.size), y, 1.0, 1e-3)
        npt.assert_array_equal(hard_decisions(qam4_llrs(out, _full_map(small_params))), bits)

    def test_noise_free_llrs_capped(self, small_params):
        y = qam4_modulate(np.zeros(2 * small_params.size, dtype=int))
        out = mmse_equalize(np.eye(small_params.size), y, 1.0, 0.0)
        llrs = qam4_llrs(out, _full_map(small_params))
        assert np.all(np.isfinite(llrs))
        npt.assert_allclose(llrs, 2 * SINR_CAP, rtol=1e-9)

    def test_codeword_order_follows_map(self, small_params):
        x_hat = np.zeros(small_params.size, dtype=complex)
        x_hat[5] = 1 + 1j
        x_hat[2] = -1 - 1j
        out = EqualizerOutput(x_hat, np.ones(small_params.size), np.ones(small_params.size), 1.0)
        amap = AllocationMap('rpe', small_params, np.array([5, 2]), 1)
        npt.assert_array_equal(hard_decisions(qam4_llrs(out, amap)), [0, 0, 1, 1])

    def test_map_outside_output(self, small_params):
        out = EqualizerOutput(np.zeros(4), np.ones(4), np.ones(4), 1.0)
        with pytest.raises(AllocationError):
            qam4_llrs(out, _full_map(small_params, 10))

    def test_awgn_ber_matches_analytic(self, small_params, rng):
        snr_db = 7.0
        N0 = noise_psd(snr_db)
        size = small_params.size
        errors = total = 0
        for _ in range(1000):
            bits = rng.integers(0, 2, size=2 * size)
            y = qam4_modulate(bits) + _complex_noise(rng, size, N0)
            out = mmse_equalize(np.eye(size), y, 1.0, N0)
            errors += np.count_nonzero(hard_decisions(qam4_llrs(out, _full_map(small_params))) != bits)
            total += bits.size
        assert errors / total == pytest.approx(float(qam4_ber(snr_db)), rel=0.1)

    @pytest.mark.slow
    def test_awgn_ber_at_1e_3(self, full_params, rng):
        snr_db = 9.8
        N0 = noise_psd(snr_db)
        size = full_params.size
        amap = _full_map(full_params)
        errors = total = 0
        while total < 1_000_000:
            bits = rng.integers(0, 2, size=2 * size)
            y = qam4_modulate(bits) + _complex_noise(rng, size, N0)
            out = mmse_equalize(np.eye(size), y, 1.0, N0)
            errors += np.count_nonzero(hard_decisions(qam4_llrs(out, amap)) != bits)
            total += bits.size
        assert errors / total == pytest.approx(float(qam4_ber(snr_db)), rel=0.1)
