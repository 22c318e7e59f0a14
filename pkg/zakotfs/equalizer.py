"""
Linear MMSE equalization of y = H x + n and Gray 4-QAM soft demapping.

LLR convention: positive means bit 0 is more likely.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg

from utils.logger import get_logger

from .acquisition import ChannelMatrix
from .allocation import AllocationError, AllocationMap

logger = get_logger('equalizer')

# gamma used for LLR scaling when the equalizer reports an infinite SINR
SINR_CAP = 1e10


class SingularSystemError(RuntimeError):
    """The MMSE system is singular (N0 = 0 with a rank-deficient channel)"""


@dataclass(frozen=True)
class EqualizerOutput:
    """Symbol estimates, per-symbol bias mu and post-equalization SINR gamma"""

    x_hat: np.ndarray
    bias: np.ndarray
    sinr: np.ndarray
    symbol_energy: float


def _matrix(H: Union[ChannelMatrix, np.ndarray]) -> np.ndarray:
    return H.H if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=complex)


def mmse_equalize(H: Union[ChannelMatrix, np.ndarray], y: np.ndarray, E_T: float, N0: float,
                  active: Optional[np.ndarray] = None) -> EqualizerOutput:
    """
    x_hat = L H^H (H L H^H + N0 I)^-1 y with prior L = E_T diag(active).

    With every bin active this is E_T H^H (E_T H H^H + N0 I)^-1 y. Inactive
    bins (nulls) get zero estimate, bias and SINR.
    """
    matrix = _matrix(H)
    size = matrix.shape[0]
    if matrix.shape != (size, size):
        raise ValueError(f"H must be square, got {matrix.shape}")
    if E_T <= 0:
        raise ValueError(f"E_T must be positive, got {E_T}")
    if N0 < 0:
        raise ValueError(f"N0 must be non-negative, got {N0}")

    prior = np.full(size, float(E_T)) if active is None else float(E_T) * np.asarray(active, dtype=float)
    system = (matrix * prior[None, :]) @ matrix.conj().T + N0 * np.eye(size)
    rhs = np.column_stack([matrix, np.asarray(y, dtype=complex).reshape(-1)])
    try:
        solved = scipy.linalg.solve(system, rhs, assume_a='her')
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"MMSE system is singular (N0={N0}): {e}") from e

    x_hat = prior * (matrix.conj().T @ solved[:, -1])
    bias = prior * np.real(np.sum(matrix.conj() * solved[:, :-1], axis=0))
    bias = np.clip(bias, 0.0, 1.0)

    with np.errstate(divide='ignore', invalid='ignore'):
        sinr = np.where(bias < 1.0, bias / (1.0 - bias), np.inf)
    if N0 == 0:
        sinr = np.where(prior > 0, np.inf, 0.0)

    return EqualizerOutput(x_hat=x_hat, bias=bias, sinr=sinr, symbol_energy=float(E_T))


def zf_equalize(H: Union[ChannelMatrix, np.ndarray], y: np.ndarray) -> np.ndarray:
    """Zero-forcing estimate H^-1 y"""
    try:
        return scipy.linalg.solve(_matrix(H), np.asarray(y, dtype=complex))
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"channel matrix is singular: {e}") from e


def hard_decisions(llrs: np.ndarray) -> np.ndarray:
    return (np.asarray(llrs) < 0).astype(np.uint8)


def qam4_llrs(out: EqualizerOutput, amap: AllocationMap) -> np.ndarray:
    """
    Per-bit LLRs of the symbols carried by an allocation map, in codeword order.

    x_hat / mu is treated as the transmitted symbol plus complex Gaussian noise
    of variance E_T / gamma.
    """
    bins = np.asarray(amap.bins)
    if np.any(bins < 0) or np.any(bins >= out.x_hat.size):
        raise AllocationError("allocation map refers to a bin outside the equalizer output")

    x_hat = out.x_hat[bins]
    bias = out.bias[bins]
    gamma = np.minimum(out.sinr[bins], SINR_CAP)
    with np.errstate(divide='ignore', invalid='ignore'):
        unbiased = np.where(bias > 0, x_hat / bias, 0.0)
    scale = 2.0 * np.sqrt(2.0) * gamma / np.sqrt(out.symbol_energy)

    llrs = np.empty(2 * bins.size)
    llrs[0::2] = scale * unbiased.real
    llrs[1::2] = scale * unbiased.imag
    return llrs
