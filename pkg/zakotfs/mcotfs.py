"""
Multicarrier OTFS comparison modem.

DD symbols go to the time-frequency grid by ISFFT, then to time by a per-slot
IDFT (rectangular pulses, no cyclic prefix). The receiver assumes the
conventional MC-OTFS model, a 2-D periodic convolution over the DD grid.

Array helpers work on axes 0 and 1 so a whole batch of frames (trailing axis)
can go through at once.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .acquisition import ChannelMatrix, PilotConfig
from .channel import ChannelRealization, apply_td_burst
from .equalizer import EqualizerOutput, mmse_equalize
from .lattice import DDSignal, LatticeError, LatticeParams, vectorize
from .zak import TDFrame

# unit responses pushed through the burst channel at once
_COLUMN_BATCH = 256


@dataclass(frozen=True)
class TFGrid:
    """X[n, m]: N time slots by M subcarriers"""

    params: LatticeParams
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.shape != (self.params.N, self.params.M):
            raise LatticeError(f"TF grid must be {self.params.N}x{self.params.M}, got {samples.shape}")
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)


def _isfft(x: np.ndarray) -> np.ndarray:
    M, N = x.shape[:2]
    spread = np.fft.ifft(np.fft.fft(x, axis=0), axis=1) * np.sqrt(N / M)
    return np.swapaxes(spread, 0, 1)


def _sfft(X: np.ndarray) -> np.ndarray:
    N, M = X.shape[:2]
    Xt = np.swapaxes(X, 0, 1)
    return np.fft.ifft(np.fft.fft(Xt, axis=1), axis=0) * np.sqrt(M / N)


def _modulate(X: np.ndarray) -> np.ndarray:
    N, M = X.shape[:2]
    slots = np.fft.ifft(X, axis=1) * np.sqrt(M)
    return slots.reshape((N * M,) + X.shape[2:])


def _demodulate(s: np.ndarray, M: int, N: int) -> np.ndarray:
    slots = s.reshape((N, M) + s.shape[1:])
    return np.fft.fft(slots, axis=1) / np.sqrt(M)


def isfft(x) -> TFGrid:
    """X[n, m] = 1/sqrt(NM) sum_{k,l} x[k, l] exp(j 2 pi (n l / N - m k / M))"""
    if not isinstance(x, DDSignal):
        raise LatticeError("isfft expects a DDSignal")
    return TFGrid(x.params, _isfft(x.samples))


def sfft(grid: TFGrid) -> DDSignal:
    return DDSignal(grid.params, _sfft(grid.samples))


def mc_modulate(grid: TFGrid) -> TDFrame:
    """Per-slot IDFT, slots concatenated"""
    return TDFrame(grid.params, _modulate(grid.samples))


def mc_demodulate(frame: TDFrame) -> TFGrid:
    """Per-slot DFT (matched rectangular pulse)"""
    params = frame.params
    return TFGrid(params, _demodulate(frame.core, params.M, params.N))


def mc_transceive(ch: ChannelRealization, x: DDSignal, params: LatticeParams) -> DDSignal:
    """DD -> TF -> burst -> physical channel -> TF -> DD, no noise"""
    burst = _modulate(_isfft(x.samples))
    received = apply_td_burst(ch, burst, params)
    return DDSignal(params, _sfft(_demodulate(received, params.M, params.N)))


def mc_channel_matrix(ch: ChannelRealization, params: LatticeParams) -> ChannelMatrix:
    """True MC-OTFS input-output matrix, one column per unit DD symbol"""
    M, N = params.M, params.N
    size = params.size
    H = np.empty((size, size), dtype=complex)
    for start in range(0, size, _COLUMN_BATCH):
        c = np.arange(start, min(start + _COLUMN_BATCH, size))
        units = np.zeros((M, N, c.size), dtype=complex)
        units[c % M, c // M, np.arange(c.size)] = 1.0
        received = apply_td_burst(ch, _modulate(_isfft(units)), params)
        responses = _sfft(_demodulate(received, M, N))
        H[:, c] = responses.reshape((size, c.size), order='F')
    return ChannelMatrix(H, params)


def estimate_periodic_kernel(received_pilot: DDSignal, cfg: PilotConfig, N0: float = 0.0,
                             threshold: Optional[float] = None) -> np.ndarray:
    """
    Kernel g[dk mod M, dl mod N] of the periodic-convolution model, read off the
    pilot response over the estimation region without any phase unwinding.
    """
    params = received_pilot.params
    M, N = params.M, params.N
    dk, dl = np.meshgrid(np.arange(-cfg.region_k, cfg.region_k + 1),
                         np.arange(-cfg.region_l, cfg.region_l + 1), indexing='ij')
    values = received_pilot.samples[(cfg.k_p + dk) % M, (cfg.l_p + dl) % N] / np.sqrt(cfg.energy)
    if threshold is None:
        threshold = cfg.threshold_sigmas * cfg.noise_level(N0)
    values = np.where(np.abs(values) > threshold, values, 0.0)

    kernel = np.zeros((M, N), dtype=complex)
    kernel[dk % M, dl % N] = values
    return kernel


def build_periodic_H(kernel: np.ndarray, params: LatticeParams) -> ChannelMatrix:
    """Doubly-circulant H[(k, l), (k', l')] = g[(k - k') mod M, (l - l') mod N]"""
    M, N = params.M, params.N
    kernel = np.asarray(kernel, dtype=complex)
    if kernel.shape != (M, N):
        raise LatticeError(f"kernel must be {M}x{N}, got {kernel.shape}")
    r = np.arange(params.size)
    k, l = r % M, r // M
    H = kernel[(k[:, None] - k[None, :]) % M, (l[:, None] - l[None, :]) % N]
    return ChannelMatrix(H, params)


def mc_acquire_and_equalize(received_pilot: DDSignal, received_data: DDSignal, cfg: PilotConfig,
                            E_T: float, N0: float, active: Optional[np.ndarray] = None) -> EqualizerOutput:
    """Periodic-model acquisition followed by the shared MMSE equalizer"""
    kernel = estimate_periodic_kernel(received_pilot, cfg, N0)
    H = build_periodic_H(kernel, received_data.params)
    return mmse_equalize(H, vectorize(received_data), E_T, N0, active)

