"""
Frame geometry, discrete quasi-periodic DD signals and discrete twisted convolution.

Indices are 0-based. A DD signal stores only its fundamental period
x[k, l], k in [0, M), l in [0, N); every other lattice point follows from

    x_dd[k + nM, l + mN] = x[k, l] * exp(j 2 pi n l / N)

Tap sets are aperiodic: plain Z^2 offsets with complex gains.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

# Entries per chunk when expanding (taps x bins) index arrays
CHUNK_ENTRIES = 1 << 19


class LatticeError(ValueError):
    """Invalid lattice geometry or mismatched lattices"""


@dataclass(frozen=True)
class LatticeParams:
    """Zak-OTFS frame geometry: bandwidth B, duration T and Doppler period"""

    bandwidth: float
    duration: float
    doppler_period: float

    def __post_init__(self):
        if self.bandwidth <= 0 or self.duration <= 0 or self.doppler_period <= 0:
            raise LatticeError("bandwidth, duration and doppler_period must be positive")
        for name, value in (('M = B*tau_p', self.bandwidth / self.doppler_period),
                            ('N = T*nu_p', self.duration * self.doppler_period)):
            if round(value) < 1 or abs(value - round(value)) > 1e-9 * max(1.0, value):
                raise LatticeError(f"{name} must be a positive integer, got {value}")

    @classmethod
    def from_counts(cls, M: int, N: int, doppler_period: float) -> 'LatticeParams':
        """Build from grid sizes and the Doppler period"""
        return cls(bandwidth=M * doppler_period, duration=N / doppler_period,
                   doppler_period=doppler_period)

    @property
    def delay_period(self) -> float:
        return 1.0 / self.doppler_period

    @property
    def M(self) -> int:
        return int(round(self.bandwidth / self.doppler_period))

    @property
    def N(self) -> int:
        return int(round(self.duration * self.doppler_period))

    @property
    def size(self) -> int:
        return self.M * self.N

    @property
    def delay_resolution(self) -> float:
        return 1.0 / self.bandwidth

    @property
    def doppler_resolution(self) -> float:
        return 1.0 / self.duration

    def describe(self) -> Dict[str, float]:
        """Plain dict for run metadata"""
        return {
            'B': self.bandwidth, 'T': self.duration,
            'tau_p': self.delay_period, 'nu_p': self.doppler_period,
            'M': self.M, 'N': self.N,
        }


@dataclass(frozen=True)
class DDSignal:
    """One fundamental period of a discrete quasi-periodic DD signal"""

    params: LatticeParams
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.shape != (self.params.M, self.params.N):
            raise LatticeError(f"samples must be {self.params.M}x{self.params.N}, got {samples.shape}")
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)

    @classmethod
    def zeros(cls, params: LatticeParams) -> 'DDSignal':
        return cls(params, np.zeros((params.M, params.N), dtype=complex))

    @classmethod
    def impulse(cls, params: LatticeParams, k: int, l: int, value: complex = 1.0) -> 'DDSignal':
        """Single nonzero sample at (k, l) of the fundamental period"""
        samples = np.zeros((params.M, params.N), dtype=complex)
        samples[k % params.M, l % params.N] = value
        return cls(params, samples)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    def __add__(self, other: 'DDSignal') -> 'DDSignal':
        _check_same(self.params, other.params)
        return DDSignal(self.params, self.samples + other.samples)

    def __sub__(self, other: 'DDSignal') -> 'DDSignal':
        _check_same(self.params, other.params)
        return DDSignal(self.params, self.samples - other.samples)

    def scaled(self, factor: complex) -> 'DDSignal':
        return DDSignal(self.params, self.samples * factor)


@dataclass(frozen=True)
class DDTapSet:
    """Aperiodic DD taps h[k, l] on Z^2 stored as coordinate arrays"""

    params: LatticeParams
    offsets: np.ndarray
    gains: np.ndarray
    bounds: Tuple[int, int, int, int] = field(default=(0, 0, 0, 0))

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=np.int64).reshape(-1, 2)
        gains = np.asarray(self.gains, dtype=complex).reshape(-1)
        if len(offsets) != len(gains):
            raise LatticeError("offsets and gains must have the same length")
        offsets, gains = _merge_duplicates(offsets, gains)
        if len(offsets):
            bounds = (int(offsets[:, 0].min()), int(offsets[:, 0].max()),
                      int(offsets[:, 1].min()), int(offsets[:, 1].max()))
        else:
            bounds = (0, 0, 0, 0)
        offsets.setflags(write=False)
        gains.setflags(write=False)
        object.__setattr__(self, 'offsets', offsets)
        object.__setattr__(self, 'gains', gains)
        object.__setattr__(self, 'bounds', bounds)

    @classmethod
    def from_dict(cls, params: LatticeParams, taps: Dict[Tuple[int, int], complex]) -> 'DDTapSet':
        keys = list(taps.keys())
        return cls(params, np.array(keys, dtype=np.int64).reshape(-1, 2),
                   np.array([taps[key] for key in keys], dtype=complex))

    @classmethod
    def from_box(cls, params: LatticeParams, origin: Tuple[int, int], box: np.ndarray,
                 floor: float = 0.0) -> 'DDTapSet':
        """Taps from a dense box whose [0, 0] entry sits at offset `origin`.

        Taps whose magnitude is below `floor` times the largest magnitude are dropped.
        """
        box = np.asarray(box, dtype=complex)
        magnitude = np.abs(box)
        peak = magnitude.max() if magnitude.size else 0.0
        keep = magnitude > floor * peak if floor > 0 else magnitude > 0
        ks, ls = np.nonzero(keep)
        offsets = np.stack([ks + origin[0], ls + origin[1]], axis=1)
        return cls(params, offsets, box[ks, ls])

    @property
    def support_bounds(self) -> Tuple[int, int, int, int]:
        """(k_min, k_max, l_min, l_max)"""
        return self.bounds

    def __len__(self) -> int:
        return len(self.gains)

    def as_dict(self) -> Dict[Tuple[int, int], complex]:
        return {(int(k), int(l)): complex(g) for (k, l), g in zip(self.offsets, self.gains)}

    def get(self, k: int, l: int) -> complex:
        hit = np.nonzero((self.offsets[:, 0] == k) & (self.offsets[:, 1] == l))[0]
        return complex(self.gains[hit[0]]) if len(hit) else 0j

    def __add__(self, other: 'DDTapSet') -> 'DDTapSet':
        _check_same(self.params, other.params)
        return DDTapSet(self.params, np.concatenate([self.offsets, other.offsets]),
                        np.concatenate([self.gains, other.gains]))

    def scaled(self, factor: complex) -> 'DDTapSet':
        return DDTapSet(self.params, self.offsets, self.gains * factor)

    def thresholded(self, level: float) -> 'DDTapSet':
        """Drop taps with magnitude at or below an absolute level"""
        keep = np.abs(self.gains) > level
        return DDTapSet(self.params, self.offsets[keep], self.gains[keep])


def _check_same(a: LatticeParams, b: LatticeParams):
    if a != b:
        raise LatticeError("operands live on different lattices")


def _merge_duplicates(offsets: np.ndarray, gains: np.ndarray):
    """Sum gains of repeated offsets and drop exact zeros"""
    if len(offsets) == 0:
        return offsets.copy(), gains.copy()
    unique, inverse = np.unique(offsets, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    merged = np.zeros(len(unique), dtype=complex)
    np.add.at(merged, inverse, gains)
    keep = merged != 0
    return unique[keep].astype(np.int64), merged[keep]


def fold(params: LatticeParams, k, l):
    """Split lattice indices into fundamental-domain indices and the quasi-periodic phase"""
    M, N = params.M, params.N
    k = np.asarray(k, dtype=np.int64)
    l = np.asarray(l, dtype=np.int64)
    k0 = np.mod(k, M)
    l0 = np.mod(l, N)
    n = (k - k0) // M
    phase = np.exp(2j * np.pi * np.mod(n * l0, N) / N)
    return k0, l0, phase


def extend(sig: DDSignal, k, l):
    """Quasi-periodic extension x_dd[k, l] for any integer (k, l)"""
    k0, l0, phase = fold(sig.params, k, l)
    inside = (np.asarray(k) == k0) & (np.asarray(l) == l0)
    values = np.where(inside, sig.samples[k0, l0], sig.samples[k0, l0] * phase)
    return complex(values) if np.ndim(values) == 0 else values


def _tap_chunks(taps: DDTapSet, per_tap: int):
    step = max(1, CHUNK_ENTRIES // max(per_tap, 1))
    for start in range(0, len(taps), step):
        yield taps.offsets[start:start + step], taps.gains[start:start + step]


def twisted_convolve(h: DDTapSet, x: DDSignal) -> DDSignal:
    """y[k,l] = sum_{k',l'} h[k-k', l-l'] x_dd[k', l'] exp(j 2 pi (l-l') k' / (MN))"""
    _check_same(h.params, x.params)
    params = x.params
    M, N = params.M, params.N
    K, L = np.meshgrid(np.arange(M), np.arange(N), indexing='ij')
    K = K.reshape(-1)
    L = L.reshape(-1)
    y = np.zeros(M * N, dtype=complex)

    for offsets, gains in _tap_chunks(h, M * N):
        dk = offsets[:, 0][:, None]
        dl = offsets[:, 1][:, None]
        k_in = K[None, :] - dk
        l_in = L[None, :] - dl
        k0, l0, phase = fold(params, k_in, l_in)
        twist = np.exp(2j * np.pi * np.mod(dl * k_in, M * N) / (M * N))
        y += np.sum(gains[:, None] * x.samples[k0, l0] * phase * twist, axis=0)

    return DDSignal(params, y.reshape(M, N))


def compose(a: DDTapSet, b: DDTapSet) -> DDTapSet:
    """Tap-set twisted convolution a * b, so that applying it equals applying b then a"""
    _check_same(a.params, b.params)
    MN = a.params.size
    p, q = a.offsets[:, 0][:, None], a.offsets[:, 1][:, None]
    r, s = b.offsets[:, 0][None, :], b.offsets[:, 1][None, :]
    gains = a.gains[:, None] * b.gains[None, :] * np.exp(2j * np.pi * np.mod(q * r, MN) / MN)
    offsets = np.stack([np.broadcast_to(p + r, gains.shape).reshape(-1),
                        np.broadcast_to(q + s, gains.shape).reshape(-1)], axis=1)
    return DDTapSet(a.params, offsets, gains.reshape(-1))


def vectorize(sig: DDSignal) -> np.ndarray:
    """Column-stack the signal: element lM + k holds x[k, l]"""
    return sig.samples.reshape(-1, order='F').copy()


def devectorize(params: LatticeParams, v: np.ndarray) -> DDSignal:
    """Inverse of vectorize"""
    v = np.asarray(v)
    if v.shape != (params.size,):
        raise LatticeError(f"vector must have length {params.size}, got shape {v.shape}")
    return DDSignal(params, v.reshape(params.M, params.N, order='F'))


def taps_from_items(params: LatticeParams, items: Iterable[Tuple[Tuple[int, int], complex]],
                    floor: Optional[float] = None) -> DDTapSet:
    """Convenience builder used by tests and tools"""
    taps = DDTapSet.from_dict(params, dict(items))
    return taps.thresholded(floor) if floor else taps
