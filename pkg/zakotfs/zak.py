"""
Discrete Zak transform between a critically sampled time-domain frame and its DD form.

    s[k + mM] = 1/sqrt(N) * sum_l x[k, l] exp(+j 2 pi l m / N)
    x[k, l]   = 1/sqrt(N) * sum_m s[k + mM] exp(-j 2 pi l m / N)

Both directions are unitary. The array helpers take (M, N) explicitly so the
channel module can run the same transform on an oversampled lattice.
"""

from dataclasses import dataclass

import numpy as np

from .lattice import DDSignal, LatticeError, LatticeParams


@dataclass(frozen=True)
class TDFrame:
    """One frame of time-domain samples at rate B, with optional guard samples"""

    params: LatticeParams
    samples: np.ndarray
    guard_before: int = 0
    guard_after: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex).reshape(-1)
        expected = self.params.size + self.guard_before + self.guard_after
        if samples.shape != (expected,):
            raise LatticeError(f"frame must hold {expected} samples, got {samples.size}")
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)

    @property
    def core(self) -> np.ndarray:
        """The M*N samples of the frame proper"""
        return self.samples[self.guard_before:self.guard_before + self.params.size]

    @property
    def sample_times(self) -> np.ndarray:
        """Sample instants in seconds, core sample 0 at t = 0"""
        q = np.arange(self.samples.size) - self.guard_before
        return q / self.params.bandwidth


def dd_to_td_array(grid: np.ndarray) -> np.ndarray:
    """Inverse DZT of an M x N array into M*N samples"""
    N = grid.shape[1]
    s = np.fft.ifft(grid, axis=1) * np.sqrt(N)
    return s.reshape(-1, order='F')


def td_to_dd_array(samples: np.ndarray, M: int, N: int) -> np.ndarray:
    """Forward DZT of M*N samples into an M x N array"""
    s = np.asarray(samples).reshape(M, N, order='F')
    return np.fft.fft(s, axis=1) / np.sqrt(N)


def inverse_zak(sig: DDSignal) -> TDFrame:
    """DD signal to its time-domain frame (the superposition of pulsones)"""
    return TDFrame(sig.params, dd_to_td_array(sig.samples))


def forward_zak(frame: TDFrame) -> DDSignal:
    """Time-domain frame to its DD representation"""
    params = frame.params
    core = frame.core
    if core.size != params.size:
        raise LatticeError(f"frame core must hold {params.size} samples, got {core.size}")
    return DDSignal(params, td_to_dd_array(core, params.M, params.N))


def pulsone(params: LatticeParams, k0: int, l0: int, energy: float = 1.0) -> TDFrame:
    """TD realization of a single DD pulse at (k0, l0)"""
    return inverse_zak(DDSignal.impulse(params, k0, l0, np.sqrt(energy)))
