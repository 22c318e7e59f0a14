"""
Doubly-spread channel: Veh-A draws, the effective DD channel h_eff, the
time-domain oracle path and AWGN.

Both apply paths model the same chain, tx filter -> physical channel -> rx
filter, sampled on the lattice. compute_h_eff evaluates the filter integral by
a Riemann sum on the Q-oversampled DD grid; apply_td runs the same sums as
time-domain operations on the oversampled lattice (QM, QN), whose frame
period is P = Q^2 MN samples at rate QB.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import fftconvolve

from utils.logger import get_logger

from .filters import FilterGrid, FilterSpec, delay_factor, doppler_factor, sample_grid
from .lattice import DDSignal, DDTapSet, LatticeParams, twisted_convolve
from .zak import TDFrame, td_to_dd_array

logger = get_logger('channel')

VEH_A_DELAYS_US = (0.0, 0.31, 0.71, 1.09, 1.73, 2.51)
VEH_A_POWERS_DB = (0.0, -1.0, -9.0, -10.0, -15.0, -20.0)

DEFAULT_TAP_FLOOR = 1e-5


@dataclass(frozen=True)
class VehAProfile:
    """Power-delay profile plus maximum Doppler; Veh-A by default"""

    nu_max: float = 0.0
    delays_us: Tuple[float, ...] = VEH_A_DELAYS_US
    powers_db: Tuple[float, ...] = VEH_A_POWERS_DB

    def __post_init__(self):
        delays = tuple(float(d) for d in self.delays_us)
        powers = tuple(float(p) for p in self.powers_db)
        if not delays or len(delays) != len(powers):
            raise ValueError("profile needs equally many delays and powers, at least one path")
        if min(delays) < 0:
            raise ValueError("path delays must be non-negative")
        if self.nu_max < 0:
            raise ValueError(f"nu_max must be non-negative, got {self.nu_max}")
        object.__setattr__(self, 'delays_us', delays)
        object.__setattr__(self, 'powers_db', powers)
        object.__setattr__(self, 'nu_max', float(self.nu_max))

    @property
    def num_paths(self) -> int:
        return len(self.delays_us)

    @property
    def delays(self) -> np.ndarray:
        """Path delays in seconds"""
        return np.asarray(self.delays_us) * 1e-6

    @property
    def powers(self) -> np.ndarray:
        """Linear path powers normalized to sum 1"""
        linear = 10.0 ** (np.asarray(self.powers_db) / 10.0)
        return linear / linear.sum()


@dataclass(frozen=True)
class ChannelRealization:
    """Paths (h_i, tau_i, nu_i) of one frame"""

    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray
    nu_max: Optional[float] = field(default=None)

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=complex).reshape(-1)
        delays = np.asarray(self.delays, dtype=float).reshape(-1)
        dopplers = np.asarray(self.dopplers, dtype=float).reshape(-1)
        if gains.size < 1:
            raise ValueError("a channel needs at least one path")
        if not gains.size == delays.size == dopplers.size:
            raise ValueError("gains, delays and dopplers must have the same length")
        if np.any(delays < 0):
            raise ValueError("path delays must be non-negative")
        for arr in (gains, delays, dopplers):
            arr.setflags(write=False)
        object.__setattr__(self, 'gains', gains)
        object.__setattr__(self, 'delays', delays)
        object.__setattr__(self, 'dopplers', dopplers)

    @classmethod
    def from_paths(cls, paths: Sequence[Tuple[complex, float, float]]) -> 'ChannelRealization':
        if not paths:
            raise ValueError("a channel needs at least one path")
        gains, delays, dopplers = zip(*paths)
        return cls(np.array(gains), np.array(delays), np.array(dopplers))

    @property
    def paths(self) -> List[Tuple[complex, float, float]]:
        return [(complex(h), float(t), float(v)) for h, t, v in zip(self.gains, self.delays, self.dopplers)]

    def __len__(self) -> int:
        return self.gains.size

    @property
    def max_delay(self) -> float:
        return float(self.delays.max())

    @property
    def max_doppler(self) -> float:
        if self.nu_max is not None:
            return float(self.nu_max)
        return float(np.abs(self.dopplers).max())

    def is_on_lattice(self, params: LatticeParams, tol: float = 1e-9) -> bool:
        """True when every delay is a multiple of 1/B and every Doppler of 1/T"""
        k = self.delays * params.bandwidth
        l = self.dopplers * params.duration
        return bool(np.all(np.abs(k - np.round(k)) < tol) and np.all(np.abs(l - np.round(l)) < tol))


def draw_veh_a(profile: VehAProfile, rng) -> ChannelRealization:
    """One Rayleigh realization: h_i ~ CN(0, p_i), nu_i = nu_max cos(theta_i)"""
    rng = np.random.default_rng(rng)
    powers = profile.powers
    gains = np.sqrt(powers / 2.0) * (rng.standard_normal(powers.size) + 1j * rng.standard_normal(powers.size))
    theta = rng.uniform(0.0, 2.0 * np.pi, powers.size)
    dopplers = profile.nu_max * np.cos(theta)
    return ChannelRealization(gains, profile.delays, dopplers, nu_max=profile.nu_max)


def check_crystallization(ch: ChannelRealization, params: LatticeParams) -> bool:
    """Warn and return False when tau_max >= tau_p or 2 nu_max >= nu_p"""
    ok = ch.max_delay < params.delay_period and 2.0 * ch.max_doppler < params.doppler_period
    if not ok:
        logger.warning(
            f"Crystallization condition violated: tau_max={ch.max_delay:.3e}s (tau_p={params.delay_period:.3e}s), "
            f"nu_max={ch.max_doppler:.1f}Hz (nu_p={params.doppler_period:.1f}Hz)"
        )
    return ok


def _path_response(gain, tau, nu, w_tx: FilterSpec, w_rx: FilterSpec, params: LatticeParams, Q: int):
    """Dense h_eff box of one path, returned with its (k, l) origin"""
    B, T = params.bandwidth, params.duration
    period = Q * Q * params.size
    btau, tnu = B * tau, T * nu

    k_lo = math.floor(btau) - w_tx.trunc_tau - w_rx.trunc_tau
    k_hi = math.ceil(btau) + w_tx.trunc_tau + w_rx.trunc_tau
    l_lo = math.floor(tnu) - w_tx.trunc_nu - w_rx.trunc_nu
    l_hi = math.ceil(tnu) + w_tx.trunc_nu + w_rx.trunc_nu
    ks = np.arange(k_lo, k_hi + 1)
    ls = np.arange(l_lo, l_hi + 1)

    # m: fine delay index of tau - tau', inside the tx delay support
    m = np.arange(math.ceil(Q * (btau - w_tx.trunc_tau) - 1e-9), math.floor(Q * (btau + w_tx.trunc_tau) + 1e-9) + 1)
    # j: fine Doppler index of nu', inside the rx Doppler support
    j = np.arange(-Q * w_rx.trunc_nu, Q * w_rx.trunc_nu + 1)

    a_rx = delay_factor(w_rx, (Q * ks[:, None] - m[None, :]) / Q, truncate=True)
    g = delay_factor(w_tx, m / Q - btau, truncate=True) * np.exp(2j * np.pi * nu * (m / (Q * B) - tau))
    coupling = doppler_factor(w_rx, j / Q, truncate=True)[None, :] \
        * np.exp(2j * np.pi * np.mod(np.outer(m, j), period) / period)
    b_tx = doppler_factor(w_tx, ls[None, :] - j[:, None] / Q - tnu, truncate=True)

    box = (a_rx @ (g[:, None] * (coupling @ b_tx))) * (gain / (Q * Q))
    return (int(k_lo), int(l_lo)), box


def compute_h_eff(ch: ChannelRealization, w_tx: FilterSpec, w_rx: FilterSpec, params: LatticeParams,
                  Q: int = 16, tap_floor: float = DEFAULT_TAP_FLOOR) -> DDTapSet:
    """
    Effective channel h_eff = w_rx *sigma h_phy *sigma w_tx sampled at (k/B, l/T).

    Evaluated per path with the delay and Doppler sums separated. Taps below
    tap_floor times the largest magnitude are dropped; tap_floor=0 keeps all.
    """
    if Q < 1:
        raise ValueError(f"oversampling Q must be at least 1, got {Q}")
    if len(ch) < 1:
        raise ValueError("channel has no paths")
    check_crystallization(ch, params)

    pieces = [_path_response(h, tau, nu, w_tx, w_rx, params, int(Q)) for h, tau, nu in ch.paths]
    k0 = min(origin[0] for origin, _ in pieces)
    l0 = min(origin[1] for origin, _ in pieces)
    k1 = max(origin[0] + box.shape[0] for origin, box in pieces)
    l1 = max(origin[1] + box.shape[1] for origin, box in pieces)

    total = np.zeros((k1 - k0, l1 - l0), dtype=complex)
    for (ko, lo), box in pieces:
        total[ko - k0:ko - k0 + box.shape[0], lo - l0:lo - l0 + box.shape[1]] += box

    taps = DDTapSet.from_box(params, (k0, l0), total, floor=tap_floor)
    logger.debug(f"h_eff: {len(taps)} taps, support {taps.support_bounds}")
    return taps


def _doppler_window(grid: FilterGrid, period: int) -> np.ndarray:
    """beta(r) = sum_j w2(j/Q) exp(j 2 pi j r / P): the time-domain face of the Doppler factor"""
    coefficients = np.zeros(period, dtype=complex)
    np.add.at(coefficients, np.mod(grid.doppler_indices, period), grid.doppler)
    return np.fft.ifft(coefficients) * period


def _fine_frame(frame: TDFrame, Q: int) -> np.ndarray:
    """Critically sampled frame lifted to the oversampled lattice (one period of P samples)"""
    params = frame.params
    fine = np.zeros(Q * Q * params.size, dtype=complex)
    fine[::Q] = np.tile(frame.core, Q) / np.sqrt(Q)
    return fine


def _fractional_shift(spectrum: np.ndarray, delay: float) -> np.ndarray:
    """Band-limited circular delay along axis 0 of periodic sequences given their FFT"""
    period = spectrum.shape[0]
    freqs = np.fft.fftfreq(period) * period
    ramp = np.exp(-2j * np.pi * freqs * delay / period).reshape((period,) + (1,) * (spectrum.ndim - 1))
    return np.fft.ifft(spectrum * ramp, axis=0)


def apply_td(ch: ChannelRealization, frame: TDFrame, w_tx: FilterSpec, w_rx: FilterSpec,
             params: LatticeParams, Q: int = 16) -> DDSignal:
    """
    Time-domain oracle: pulse-shape the frame, pass it through
    y(t) = sum_i h_i x(t - tau_i) exp(j 2 pi nu_i (t - tau_i)), matched-filter
    and sample back onto the lattice. No noise.

    The frame is the critically sampled Zak frame of the transmitted DD
    signal; pulse shaping happens here on the oversampled grid.
    """
    if Q < 1:
        raise ValueError(f"oversampling Q must be at least 1, got {Q}")
    B, T = params.bandwidth, params.duration
    M, N = params.M, params.N
    period = Q * Q * params.size
    half = period // 2
    tx, rx = sample_grid(w_tx, params, Q), sample_grid(w_rx, params, Q)

    # tx: modulate by the Doppler window, then circular convolution with the delay pulse
    s0 = _fine_frame(frame, Q) * _doppler_window(tx, period)
    kernel = np.zeros(period, dtype=complex)
    np.add.at(kernel, np.mod(tx.delay_indices, period), tx.delay)
    spectrum = np.fft.fft(kernel) * np.fft.fft(s0) * tx.scale

    # three periods, r in [-P - P//2, 2P - P//2); the centre one is [-P//2, P - P//2)
    r = np.arange(-period - half, 2 * period - half)
    received = np.zeros(r.size, dtype=complex)
    for h, tau, nu in ch.paths:
        shifted = _fractional_shift(spectrum, Q * B * tau)
        received += h * shifted[np.mod(r, period)] * np.exp(2j * np.pi * nu * (r / (Q * B) - tau))

    # rx: Doppler window, then linear convolution with the delay pulse
    received *= _doppler_window(rx, period)[np.mod(r, period)]
    filtered = fftconvolve(received, rx.delay, mode='same')
    filtered *= rx.scale / (Q * Q * B * T)

    centre = filtered[period:2 * period]
    fine = np.roll(centre, -half)
    dd = td_to_dd_array(fine[::Q], M, Q * N)[:, ::Q]
    return DDSignal(params, dd)


def apply_dd(ch: ChannelRealization, sig: DDSignal, w_tx: FilterSpec, w_rx: FilterSpec,
             params: LatticeParams, Q: int = 16, tap_floor: float = DEFAULT_TAP_FLOOR) -> DDSignal:
    """Model path: twisted convolution with the true h_eff"""
    return twisted_convolve(compute_h_eff(ch, w_tx, w_rx, params, Q, tap_floor), sig)


def apply_td_burst(ch: ChannelRealization, samples: np.ndarray, params: LatticeParams,
                   pad: Optional[int] = None) -> np.ndarray:
    """
    Physical channel on a single non-periodic burst sampled at rate B.

    The burst is zero padded, delayed by band-limited interpolation, Doppler
    shifted and cropped back to its own window; energy spilling past the end
    is lost. Extra trailing axes are independent bursts.
    """
    samples = np.asarray(samples, dtype=complex)
    length = samples.shape[0]
    B = params.bandwidth
    if pad is None:
        pad = length
    padded = np.concatenate([samples, np.zeros((pad,) + samples.shape[1:], dtype=complex)], axis=0)
    spectrum = np.fft.fft(padded, axis=0)
    t = (np.arange(padded.shape[0]) / B).reshape((-1,) + (1,) * (samples.ndim - 1))

    out = np.zeros(padded.shape, dtype=complex)
    for h, tau, nu in ch.paths:
        out += h * _fractional_shift(spectrum, B * tau) * np.exp(2j * np.pi * nu * (t - tau))
    return out[:length]


def add_noise(sig: DDSignal, N0: float, rng) -> DDSignal:
    """i.i.d. CN(0, N0) on every fundamental-domain sample"""
    if N0 < 0:
        raise ValueError(f"N0 must be non-negative, got {N0}")
    if N0 == 0:
        return sig
    rng = np.random.default_rng(rng)
    shape = sig.samples.shape
    noise = np.sqrt(N0 / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return DDSignal(sig.params, sig.samples + noise)
