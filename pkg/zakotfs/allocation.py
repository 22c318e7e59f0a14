"""
Placement of codeword symbols on DD bins.

Codeword symbol s carries bits (2s, 2s+1) of the systematic codeword, so
symbols [0, k/2) carry information and [k/2, n/2) parity. Bins are addressed
by their vector index lM + k.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from utils.helpers import write_csv
from utils.logger import get_logger

from .lattice import DDSignal, LatticeParams, devectorize

logger = get_logger('allocation')

STANDARD = 'standard'
STRIP = 'strip'
RPE = 'rpe'
STRATEGIES = (STANDARD, STRIP, RPE)

INFO = 'info'
PARITY = 'parity'
NULL = 'null'


class AllocationError(ValueError):
    """Codeword does not fit the frame or a map is used with mismatched data"""


@dataclass(frozen=True)
class AllocationMap:
    """bins[s] is the vector index of codeword symbol s; unlisted bins are null"""

    strategy: str
    params: LatticeParams
    bins: np.ndarray
    num_info: int

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.int64).reshape(-1)
        if np.any(bins < 0) or np.any(bins >= self.params.size):
            raise AllocationError("allocation bin outside the fundamental domain")
        if np.unique(bins).size != bins.size:
            raise AllocationError("two symbols share a bin")
        if not 0 <= self.num_info <= bins.size:
            raise AllocationError(f"num_info={self.num_info} inconsistent with {bins.size} symbols")
        bins.setflags(write=False)
        object.__setattr__(self, 'bins', bins)

    @property
    def num_symbols(self) -> int:
        return int(self.bins.size)

    @property
    def num_parity(self) -> int:
        return self.num_symbols - self.num_info

    @property
    def num_null(self) -> int:
        return self.params.size - self.num_symbols

    @property
    def info_bins(self) -> np.ndarray:
        return self.bins[:self.num_info]

    @property
    def parity_bins(self) -> np.ndarray:
        return self.bins[self.num_info:]

    def active_mask(self) -> np.ndarray:
        """True for bins carrying a symbol, indexed by vector index"""
        mask = np.zeros(self.params.size, dtype=bool)
        mask[self.bins] = True
        return mask

    def roles(self) -> np.ndarray:
        """Role of every bin, indexed by vector index"""
        roles = np.full(self.params.size, NULL, dtype=object)
        roles[self.info_bins] = INFO
        roles[self.parity_bins] = PARITY
        return roles

    def symbol_of_bin(self) -> np.ndarray:
        """Symbol index per bin, -1 for null bins"""
        owner = np.full(self.params.size, -1, dtype=np.int64)
        owner[self.bins] = np.arange(self.bins.size)
        return owner

    def info_only(self) -> 'AllocationMap':
        """The same placement with parity symbols left untransmitted"""
        return AllocationMap(self.strategy, self.params, self.bins[:self.num_info], self.num_info)


def _symbol_counts(params: LatticeParams, code):
    if code.k % 2 or (code.n - code.k) % 2:
        raise AllocationError(f"4-QAM needs even info and parity lengths, got n={code.n}, k={code.k}")
    num_info = code.k // 2
    num_parity = (code.n - code.k) // 2
    if num_info + num_parity > params.size:
        raise AllocationError(
            f"{num_info + num_parity} codeword symbols do not fit {params.M}x{params.N}={params.size} bins"
        )
    return num_info, num_parity


def make_standard(params: LatticeParams, code) -> AllocationMap:
    """Symbol s on bin s (raster order, k fastest); nulls take the last bins"""
    num_info, num_parity = _symbol_counts(params, code)
    return AllocationMap(STANDARD, params, np.arange(num_info + num_parity), num_info)


def _row_order(rows, pilot_row: int):
    return sorted(rows, key=lambda l: (abs(l - pilot_row), l))


def make_strip(params: LatticeParams, code, pilot_row: Optional[int] = None) -> AllocationMap:
    """
    Information symbols in a full-delay rectangle of rows centred on the pilot row.

    Rows fill in order of distance from the pilot row (lower row first on
    ties), k ascending inside a row; the last slots of each region are null.
    """
    M, N = params.M, params.N
    num_info, num_parity = _symbol_counts(params, code)
    pilot_row = N // 2 if pilot_row is None else int(pilot_row)

    height = -(-num_info // M)
    first = pilot_row - height // 2
    last = first + height - 1
    if height > N or first < 0 or last >= N:
        raise AllocationError(f"strip of {height} rows around row {pilot_row} exceeds the {N} Doppler rows")

    inside = _row_order(range(first, last + 1), pilot_row)
    outside = _row_order([l for l in range(N) if not first <= l <= last], pilot_row)
    inside_slots = np.array([l * M + k for l in inside for k in range(M)], dtype=np.int64)
    outside_slots = np.array([l * M + k for l in outside for k in range(M)], dtype=np.int64)
    if num_parity > outside_slots.size:
        raise AllocationError(f"{num_parity} parity symbols do not fit the {outside_slots.size} bins outside the strip")

    bins = np.concatenate([inside_slots[:num_info], outside_slots[:num_parity]])
    return AllocationMap(STRIP, params, bins, num_info)


def make_rpe(params: LatticeParams, code, rpe_map: np.ndarray) -> AllocationMap:
    """Bins by ascending RPE (ties by bin index): info first, then parity, then nulls"""
    num_info, num_parity = _symbol_counts(params, code)
    rpe_map = np.asarray(rpe_map, dtype=float)
    if rpe_map.shape != (params.M, params.N):
        raise AllocationError(f"RPE map must be {params.M}x{params.N}, got {rpe_map.shape}")

    scores = rpe_map.reshape(-1, order='F')
    undefined = ~np.isfinite(scores)
    if undefined.any():
        logger.debug(f"{int(undefined.sum())} undefined RPE bins ranked last")
        scores = np.where(undefined, np.inf, scores)

    order = np.lexsort((np.arange(params.size), scores))
    return AllocationMap(RPE, params, order[:num_info + num_parity], num_info)


def qam4_modulate(bits: np.ndarray, E_T: float = 1.0) -> np.ndarray:
    """Gray 4-QAM: bit pair (b0, b1) -> sqrt(E_T) ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)"""
    pairs = np.asarray(bits, dtype=np.int64).reshape(-1, 2)
    return np.sqrt(E_T) * ((1 - 2 * pairs[:, 0]) + 1j * (1 - 2 * pairs[:, 1])) / np.sqrt(2.0)


def make_allocation(strategy: str, params: LatticeParams, code, pilot_row: Optional[int] = None,
                    rpe_map: Optional[np.ndarray] = None) -> AllocationMap:
    if strategy == STANDARD:
        return make_standard(params, code)
    if strategy == STRIP:
        return make_strip(params, code, pilot_row)
    if strategy == RPE:
        if rpe_map is None:
            raise AllocationError("RPE allocation needs an RPE map")
        return make_rpe(params, code, rpe_map)
    raise AllocationError(f"unknown allocation strategy {strategy!r}")


def map_symbols(bits: np.ndarray, amap: AllocationMap, E_T: float = 1.0) -> DDSignal:
    """Gray 4-QAM symbols of the codeword bits placed on their bins; null bins are zero"""
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    if bits.size != 2 * amap.num_symbols:
        raise AllocationError(f"map carries {2 * amap.num_symbols} bits, got {bits.size}")
    v = np.zeros(amap.params.size, dtype=complex)
    v[amap.bins] = qam4_modulate(bits, E_T)
    return devectorize(amap.params, v)


def unmap_llrs(bin_llrs: np.ndarray, amap: AllocationMap) -> np.ndarray:
    """Per-bin LLR pairs (shape MN x 2, vector order) to codeword bit order; nulls dropped"""
    bin_llrs = np.asarray(bin_llrs, dtype=float)
    if bin_llrs.shape != (amap.params.size, 2):
        raise AllocationError(f"expected per-bin LLRs of shape ({amap.params.size}, 2), got {bin_llrs.shape}")
    return bin_llrs[amap.bins].reshape(-1)


def write_allocation_csv(amap: AllocationMap, path: Path, digest: Optional[str] = None) -> Path:
    """One row per bin: symbol_index (-1 for null), role, k, l"""
    M = amap.params.M
    owner = amap.symbol_of_bin()
    roles = amap.roles()
    rows = [(int(owner[b]), roles[b], b % M, b // M) for b in range(amap.params.size)]
    return write_csv(path, ('symbol_index', 'role', 'k', 'l'), rows, digest)
