"""
Factorizable DD pulse-shaping filters.

w(tau, nu) = sqrt(BT) * w1(B tau) * w2(T nu), with w1/w2 either sinc or the
unit-rate root-raised-cosine impulse response.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .lattice import LatticeParams

SINC = 'sinc'
RRC = 'rrc'
KINDS = (SINC, RRC)

DEFAULT_TRUNCATION = {SINC: 20, RRC: 8}


@dataclass(frozen=True)
class FilterSpec:
    """Filter family, roll-offs and truncation half-widths in lattice bins"""

    kind: str = SINC
    beta_tau: float = 0.0
    beta_nu: float = 0.0
    trunc_tau: Optional[int] = None
    trunc_nu: Optional[int] = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise ValueError(f"filter kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, 'kind', kind)
        if kind == SINC:
            object.__setattr__(self, 'beta_tau', 0.0)
            object.__setattr__(self, 'beta_nu', 0.0)
        for name in ('beta_tau', 'beta_nu'):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
            object.__setattr__(self, name, value)
        for name in ('trunc_tau', 'trunc_nu'):
            value = getattr(self, name)
            value = DEFAULT_TRUNCATION[kind] if value is None else int(value)
            if value < 1:
                raise ValueError(f"{name} must be at least 1, got {value}")
            object.__setattr__(self, name, value)

    def expansion(self, params: LatticeParams) -> Dict[str, float]:
        """Occupied bandwidth and frame duration for run metadata"""
        return {
            'occupied_bandwidth': (1.0 + self.beta_tau) * params.bandwidth,
            'occupied_duration': (1.0 + self.beta_nu) * params.duration,
        }


def rrc_pulse(x, beta: float) -> np.ndarray:
    """Unit-rate root-raised-cosine impulse response (unit energy)"""
    x = np.asarray(x, dtype=float)
    if beta == 0.0:
        return np.sinc(x)

    out = np.empty_like(x)
    at_zero = np.isclose(x, 0.0, atol=1e-12)
    at_edge = np.isclose(np.abs(x), 1.0 / (4.0 * beta), atol=1e-12)
    regular = ~(at_zero | at_edge)

    xr = x[regular]
    numerator = np.sin(np.pi * xr * (1.0 - beta)) + 4.0 * beta * xr * np.cos(np.pi * xr * (1.0 + beta))
    denominator = np.pi * xr * (1.0 - (4.0 * beta * xr) ** 2)
    out[regular] = numerator / denominator

    out[at_zero] = 1.0 - beta + 4.0 * beta / np.pi
    out[at_edge] = (beta / np.sqrt(2.0)) * (
        (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
        + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
    )
    return out


def delay_factor(spec: FilterSpec, x, truncate: bool = False) -> np.ndarray:
    """w1 as a function of delay in units of 1/B"""
    x = np.asarray(x, dtype=float)
    values = rrc_pulse(x, spec.beta_tau) if spec.kind == RRC else np.sinc(x)
    if truncate:
        values = np.where(np.abs(x) <= spec.trunc_tau + 1e-9, values, 0.0)
    return values


def doppler_factor(spec: FilterSpec, y, truncate: bool = False) -> np.ndarray:
    """w2 as a function of Doppler in units of 1/T"""
    y = np.asarray(y, dtype=float)
    values = rrc_pulse(y, spec.beta_nu) if spec.kind == RRC else np.sinc(y)
    if truncate:
        values = np.where(np.abs(y) <= spec.trunc_nu + 1e-9, values, 0.0)
    return values


def evaluate(spec: FilterSpec, params: LatticeParams, tau, nu):
    """w(tau, nu) = sqrt(BT) w1(B tau) w2(T nu), untruncated"""
    B, T = params.bandwidth, params.duration
    value = np.sqrt(B * T) * delay_factor(spec, B * np.asarray(tau, dtype=float)) \
        * doppler_factor(spec, T * np.asarray(nu, dtype=float))
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class FilterGrid:
    """Filter samples on the Q-oversampled grid tau = i/(QB), nu = j/(QT)"""

    spec: FilterSpec
    params: LatticeParams
    oversampling: int
    delay: np.ndarray
    doppler: np.ndarray

    @property
    def delay_indices(self) -> np.ndarray:
        half = (self.delay.size - 1) // 2
        return np.arange(-half, half + 1)

    @property
    def doppler_indices(self) -> np.ndarray:
        half = (self.doppler.size - 1) // 2
        return np.arange(-half, half + 1)

    @property
    def scale(self) -> float:
        return float(np.sqrt(self.params.bandwidth * self.params.duration))

    @property
    def table(self) -> np.ndarray:
        """Full 2-D table, rows indexed by delay, columns by Doppler"""
        return self.scale * np.outer(self.delay, self.doppler)

    def center(self) -> float:
        return float(self.table[(self.delay.size - 1) // 2, (self.doppler.size - 1) // 2])


def sample_grid(spec: FilterSpec, params: LatticeParams, oversampling: int) -> FilterGrid:
    """Oversampled filter table over i in [-Q K_tau, Q K_tau], j in [-Q K_nu, Q K_nu]"""
    Q = int(oversampling)
    if Q < 1:
        raise ValueError(f"oversampling must be at least 1, got {oversampling}")
    i = np.arange(-Q * spec.trunc_tau, Q * spec.trunc_tau + 1)
    j = np.arange(-Q * spec.trunc_nu, Q * spec.trunc_nu + 1)
    return FilterGrid(
        spec=spec,
        params=params,
        oversampling=Q,
        delay=delay_factor(spec, i / Q),
        doppler=doppler_factor(spec, j / Q),
    )
