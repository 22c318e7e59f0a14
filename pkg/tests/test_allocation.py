import csv
from types import SimpleNamespace

import numpy as np
import numpy.testing as npt
import pytest

from zakotfs.allocation import (INFO, NULL, PARITY, RPE, STANDARD, STRIP, AllocationError, AllocationMap,
                                make_allocation, make_rpe, make_standard, make_strip, map_symbols, qam4_modulate,
                                unmap_llrs, write_allocation_csv)
from zakotfs.lattice import LatticeParams, vectorize


@pytest.fixture
def frame():
    return LatticeParams.from_counts(16, 16, 30000.0)


@pytest.fixture
def code():
    # 222 symbols: 111 info, 111 parity, 34 null on a 16x16 frame
    return SimpleNamespace(n=444, k=222)


def _radial_map(params, pilot_row):
    k, l = np.meshgrid(np.arange(params.M), np.arange(params.N), indexing='ij')
    return 0.01 + np.abs(l - pilot_row) / params.N + 0.001 * np.abs(k - params.M // 2)


class TestAllocationMap:

    def test_duplicate_bins_rejected(self, frame):
        with pytest.raises(AllocationError):
            AllocationMap(STANDARD, frame, [0, 1, 1], 1)

    def test_out_of_range_rejected(self, frame):
        with pytest.raises(AllocationError):
            AllocationMap(STANDARD, frame, [0, frame.size], 1)

    def test_roles_partition(self, frame, code):
        for strategy in (STANDARD, STRIP):
            amap = make_allocation(strategy, frame, code)
            roles = amap.roles()
            assert np.count_nonzero(roles == INFO) == 111
            assert np.count_nonzero(roles == PARITY) == 111
            assert np.count_nonzero(roles == NULL) == 34
            assert amap.num_null == 34

    def test_info_only(self, frame, code):
        amap = make_strip(frame, code).info_only()
        assert amap.num_symbols == 111
        assert amap.num_parity == 0
        assert amap.active_mask().sum() == 111

    def test_symbol_of_bin(self, frame, code):
        amap = make_standard(frame, code)
        owner = amap.symbol_of_bin()
        assert owner[5] == 5
        assert owner[-1] == -1


class TestStrategies:

    def test_standard_raster(self, frame, code):
        amap = make_standard(frame, code)
        assert amap.bins[0] == 0
        assert amap.bins[1] == 1  # (k=1, l=0)
        assert amap.bins[-1] == 221
        assert not amap.active_mask()[222:].any()

    def test_strip_rows(self, frame, code):
        amap = make_strip(frame, code, pilot_row=8)
        info_rows = amap.info_bins // frame.M
        parity_rows = amap.parity_bins // frame.M
        assert info_rows.min() == 5 and info_rows.max() == 11
        assert not np.any((parity_rows >= 5) & (parity_rows <= 11))
        # the pilot row fills first, k ascending
        npt.assert_array_equal(amap.info_bins[:16], 8 * 16 + np.arange(16))

    def test_strip_nulls_at_extremes(self, frame, code):
        amap = make_strip(frame, code, pilot_row=8)
        null_rows = set((np.nonzero(~amap.active_mask())[0] // frame.M).tolist())
        # strip rows fill 8, 7, 9, 6, 10, 5, 11; outside rows 4, 12, 3, 13, 2, 14, 1, 15, 0
        assert null_rows == {11, 1, 15, 0}

    def test_strip_must_fit(self, frame, code):
        with pytest.raises(AllocationError):
            make_strip(frame, code, pilot_row=0)

    def test_uniform_rpe_is_raster(self, frame, code):
        amap = make_rpe(frame, code, np.ones((16, 16)))
        npt.assert_array_equal(amap.bins, make_standard(frame, code).bins)

    def test_rpe_sorted_partition(self, frame, code, rng):
        rpe = rng.uniform(size=(16, 16))
        amap = make_rpe(frame, code, rpe)
        scores = rpe.reshape(-1, order='F')
        assert scores[amap.info_bins].max() <= scores[amap.parity_bins].min()
        assert scores[amap.parity_bins].max() <= scores[~amap.active_mask()].min()

    def test_rpe_nan_ranked_last(self, frame, code):
        rpe = np.ones((16, 16))
        rpe[0, 0] = np.nan
        amap = make_rpe(frame, code, rpe)
        assert not amap.active_mask()[0]

    def test_rpe_info_closer_to_pilot(self, frame, code):
        amap = make_rpe(frame, code, _radial_map(frame, 8))
        info_offset = np.abs(amap.info_bins // 16 - 8).mean()
        parity_offset = np.abs(amap.parity_bins // 16 - 8).mean()
        assert info_offset < parity_offset

    def test_rpe_shape_checked(self, frame, code):
        with pytest.raises(AllocationError):
            make_rpe(frame, code, np.ones((4, 4)))

    def test_make_allocation_errors(self, frame, code):
        with pytest.raises(AllocationError):
            make_allocation(RPE, frame, code)
        with pytest.raises(AllocationError):
            make_allocation('diagonal', frame, code)

    def test_odd_lengths_rejected(self, frame):
        with pytest.raises(AllocationError):
            make_standard(frame, SimpleNamespace(n=10, k=5))

    def test_too_long_code(self, frame):
        with pytest.raises(AllocationError):
            make_standard(frame, SimpleNamespace(n=600, k=300))


class TestSymbolMapping:

    def test_constellation(self):
        npt.assert_allclose(qam4_modulate([0, 0, 0, 1, 1, 0, 1, 1]),
                            np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2))
        assert np.abs(qam4_modulate([1, 1], E_T=4.0))[0] == pytest.approx(2.0)

    def test_all_zero_codeword(self, frame, code):
        amap = make_strip(frame, code)
        v = vectorize(map_symbols(np.zeros(444, dtype=np.uint8), amap, 2.0))
        npt.assert_allclose(v[amap.bins], np.sqrt(2.0) * (1 + 1j) / np.sqrt(2))
        assert np.all(v[~amap.active_mask()] == 0)

    def test_frame_energy(self, frame, code, rng):
        amap = make_standard(frame, code)
        sig = map_symbols(rng.integers(0, 2, size=444), amap, 1.5)
        assert sig.energy() == pytest.approx(222 * 1.5)

    def test_unmap_round_trip(self, frame, code, rng):
        amap = make_rpe(frame, code, rng.uniform(size=(16, 16)))
        bits = rng.integers(0, 2, size=444)
        v = vectorize(map_symbols(bits, amap))
        bin_llrs = np.stack([v.real, v.imag], axis=1)
        npt.assert_array_equal((unmap_llrs(bin_llrs, amap) < 0).astype(int), bits)

    def test_length_mismatch(self, frame, code):
        amap = make_standard(frame, code)
        with pytest.raises(AllocationError):
            map_symbols(np.zeros(10), amap)
        with pytest.raises(AllocationError):
            unmap_llrs(np.zeros((10, 2)), amap)


class TestExport:

    def test_csv(self, frame, code, tmp_path):
        amap = make_strip(frame, code)
        path = write_allocation_csv(amap, tmp_path / 'strip.csv', 'abc123')
        lines = path.read_text().splitlines()
        assert lines[0] == '# config_hash=abc123'
        rows = list(csv.reader(lines[1:]))
        assert rows[0] == ['symbol_index', 'role', 'k', 'l']
        assert len(rows) == 1 + frame.size
        first_info = next(r for r in rows[1:] if r[0] == '0')
        assert first_info[1] == INFO and first_info[3] == '8'
