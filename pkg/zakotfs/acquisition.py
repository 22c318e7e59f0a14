"""
Model-free acquisition: read h_eff off the response to a single pilot,
assemble the DD channel matrix and score per-bin prediction error (RPE).
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from utils.logger import get_logger

from .lattice import (DDSignal, DDTapSet, LatticeParams, CHUNK_ENTRIES, devectorize, extend, fold,
                      twisted_convolve, vectorize)

logger = get_logger('acquisition')


class AcquisitionError(ValueError):
    """Pilot placement or estimation region does not fit the lattice"""


@dataclass(frozen=True)
class PilotConfig:
    """Pilot bin, pilot energy and estimation region. None picks the default."""

    params: LatticeParams
    k_p: Optional[int] = None
    l_p: Optional[int] = None
    energy: Optional[float] = None
    region_k: Optional[int] = None
    region_l: Optional[int] = None
    symbol_energy: float = 1.0
    threshold_sigmas: float = 3.0

    def __post_init__(self):
        M, N = self.params.M, self.params.N
        defaults = {
            'k_p': M // 2,
            'l_p': N // 2,
            'energy': M * N * self.symbol_energy,
            'region_k': max(M // 2 - 1, 0),
            'region_l': max(N // 2 - 1, 0),
        }
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        object.__setattr__(self, 'energy', float(self.energy))

        if not (0 <= self.k_p < M and 0 <= self.l_p < N):
            raise AcquisitionError(f"pilot bin ({self.k_p}, {self.l_p}) outside the {M}x{N} fundamental domain")
        if self.energy <= 0:
            raise AcquisitionError(f"pilot energy must be positive, got {self.energy}")
        if self.region_k < 0 or self.region_l < 0:
            raise AcquisitionError("estimation region half-widths must be non-negative")
        if 2 * self.region_k + 1 > M or 2 * self.region_l + 1 > N:
            raise AcquisitionError(
                f"estimation region {2 * self.region_k + 1}x{2 * self.region_l + 1} exceeds the {M}x{N} fundamental domain"
            )
        if self.threshold_sigmas < 0:
            raise AcquisitionError("threshold_sigmas must be non-negative")

    @property
    def pilot_bin(self):
        return self.k_p, self.l_p

    def noise_level(self, N0: float) -> float:
        """Per-tap estimation noise standard deviation sqrt(N0 / E_p)"""
        return float(np.sqrt(N0 / self.energy))


@dataclass(frozen=True)
class ChannelMatrix:
    """H_dd with row l*M + k for output bin (k, l) and column l'*M + k' for input bin (k', l')"""

    H: np.ndarray
    params: LatticeParams

    def __post_init__(self):
        size = self.params.size
        if self.H.shape != (size, size):
            raise ValueError(f"channel matrix must be {size}x{size}, got {self.H.shape}")

    def apply(self, x: DDSignal) -> DDSignal:
        return devectorize(self.params, self.H @ vectorize(x))

    def column(self, k: int, l: int) -> np.ndarray:
        return self.H[:, l * self.params.M + k]


def pilot_frame(params: LatticeParams, cfg: PilotConfig) -> DDSignal:
    """sqrt(E_p) at the pilot bin, zeros elsewhere"""
    return DDSignal.impulse(params, cfg.k_p, cfg.l_p, np.sqrt(cfg.energy))


def estimate_h_eff(received_pilot: DDSignal, cfg: PilotConfig, N0: float = 0.0,
                   threshold: Optional[float] = None) -> DDTapSet:
    """
    Read h_eff off the pilot response over the estimation region.

    Taps at or below `threshold` are zeroed; by default the threshold is
    threshold_sigmas times sqrt(N0 / E_p).
    """
    params = received_pilot.params
    if params != cfg.params:
        raise AcquisitionError("pilot config and received pilot live on different lattices")

    dk, dl = np.meshgrid(np.arange(-cfg.region_k, cfg.region_k + 1),
                         np.arange(-cfg.region_l, cfg.region_l + 1), indexing='ij')
    dk = dk.reshape(-1)
    dl = dl.reshape(-1)
    observed = extend(received_pilot, cfg.k_p + dk, cfg.l_p + dl)
    unwind = np.exp(-2j * np.pi * np.mod(dl * cfg.k_p, params.size) / params.size)
    estimates = observed * unwind / np.sqrt(cfg.energy)

    if threshold is None:
        threshold = cfg.threshold_sigmas * cfg.noise_level(N0)
    keep = np.abs(estimates) > threshold
    taps = DDTapSet(params, np.stack([dk[keep], dl[keep]], axis=1), estimates[keep])
    logger.debug(f"Pilot read-off kept {len(taps)} of {dk.size} taps (threshold {threshold:.3e})")
    return taps


def build_H(taps: DDTapSet, params: LatticeParams) -> ChannelMatrix:
    """Dense MN x MN matrix of y = h *sigma x with quasi-periodic aliases folded in"""
    M, N = params.M, params.N
    size = params.size
    K, L = np.meshgrid(np.arange(M), np.arange(N), indexing='ij')
    K = K.reshape(-1)
    L = L.reshape(-1)
    rows = L * M + K

    real = np.zeros(size * size)
    imag = np.zeros(size * size)
    step = max(1, CHUNK_ENTRIES // size)
    for start in range(0, len(taps), step):
        offsets = taps.offsets[start:start + step]
        gains = taps.gains[start:start + step]
        dk = offsets[:, 0][:, None]
        dl = offsets[:, 1][:, None]
        k_in = K[None, :] - dk
        l_in = L[None, :] - dl
        k0, l0, phase = fold(params, k_in, l_in)
        twist = np.exp(2j * np.pi * np.mod(dl * k_in, size) / size)
        values = (gains[:, None] * phase * twist).reshape(-1)
        flat = (np.broadcast_to(rows[None, :], k0.shape) * size + (l0 * M + k0)).reshape(-1)
        real += np.bincount(flat, weights=values.real, minlength=size * size)
        imag += np.bincount(flat, weights=values.imag, minlength=size * size)

    return ChannelMatrix((real + 1j * imag).reshape(size, size), params)


def compute_rpe(true_response: Callable[[DDSignal], DDSignal], estimated: DDTapSet,
                params: LatticeParams) -> np.ndarray:
    """
    RPE[k, l] = ||y_pred - y_true||^2 / ||y_true||^2 for a unit symbol at (k, l).

    true_response maps a DD input to the noise-free channel output (e.g. the
    time-domain path); bins with zero true response are NaN.
    """
    rpe = np.full((params.M, params.N), np.nan)
    for k in range(params.M):
        for l in range(params.N):
            unit = DDSignal.impulse(params, k, l)
            y_true = true_response(unit).samples
            y_pred = twisted_convolve(estimated, unit).samples
            reference = np.sum(np.abs(y_true) ** 2)
            if reference > 0:
                rpe[k, l] = np.sum(np.abs(y_pred - y_true) ** 2) / reference
    return rpe


def channel_matrix_rpe(H_true: ChannelMatrix, H_est: ChannelMatrix) -> np.ndarray:
    """RPE from matrices: column c of H is the response to a unit symbol at bin c"""
    params = H_true.params
    reference = np.sum(np.abs(H_true.H) ** 2, axis=0)
    error = np.sum(np.abs(H_est.H - H_true.H) ** 2, axis=0)
    with np.errstate(divide='ignore', invalid='ignore'):
        rpe = np.where(reference > 0, error / reference, np.nan)
    return rpe.reshape(params.M, params.N, order='F')
