"""
Rate-1/2 (3,6)-regular quasi-cyclic LDPC code.

The all-ones 3x6 protograph is lifted twice: first by 2x2 permutations (a 6x12
binary base), then by Z x Z circulants (Z = 251 gives n = 3012). Circulant
exponents are picked greedily: never close a 4-cycle, and prefer the shift
that closes the fewest 6-cycles.

Every column meets each base row exactly once, so the three base rows are
the decoder layers and each layer touches every variable once.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Tuple

import numpy as np

from utils.logger import get_logger

logger = get_logger('ldpc')

BASE_ROWS = 3
BASE_COLS = 6
DEFAULT_LIFTING = 251
LLR_CLIP = 30.0
CANDIDATES_PER_ENTRY = 16
MAX_SEED_ATTEMPTS = 8

LAYERED = 'layered'
FLOODING = 'flooding'

# keeps atanh finite
_TANH_LIMIT = 1.0 - 1e-12


class CodeConstructionError(RuntimeError):
    """No valid exponent assignment found within the seed budget"""


class DecodeResult(NamedTuple):
    bits: np.ndarray
    converged: bool
    iterations: int


@dataclass(frozen=True)
class LdpcCode:
    """
    Systematic codeword order is [message | frozen | parity].

    The lifted protograph has rank deficiency, so n - rank exceeds n/2; the
    surplus systematic bits are frozen to zero and ride with the parity.
    """

    n: int
    k: int
    lifting: int
    seed: int
    exponents: np.ndarray
    check_index: np.ndarray
    permutation: np.ndarray
    parity_map: np.ndarray
    rank: int

    @property
    def m(self) -> int:
        return self.check_index.shape[0]

    @property
    def num_frozen(self) -> int:
        return self.n - self.rank - self.k

    @property
    def num_parity(self) -> int:
        return self.n - self.k

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def layers(self) -> np.ndarray:
        """check_index split into layers, shape (layers, checks per layer, row weight)"""
        return self.check_index.reshape(BASE_ROWS, -1, self.check_index.shape[1])

    @property
    def H(self) -> np.ndarray:
        """Dense parity-check matrix in codeword order"""
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        H[np.arange(self.m)[:, None], self.check_index] = 1
        return H

    @property
    def H_qc(self) -> np.ndarray:
        """Dense parity-check matrix in quasi-cyclic column order"""
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        H[:, self.permutation] = self.H
        return H

    def generator(self) -> np.ndarray:
        """Systematic generator: one codeword row per message bit"""
        G = np.zeros((self.k, self.n), dtype=np.uint8)
        G[:, :self.k] = np.eye(self.k, dtype=np.uint8)
        G[:, self.n - self.rank:] = self.parity_map[:, :self.k].T
        return G

    def describe(self) -> dict:
        return {
            'n': int(self.n), 'k': int(self.k), 'lifting': int(self.lifting), 'seed': int(self.seed),
            'rank': int(self.rank), 'frozen': int(self.num_frozen),
        }


def _two_lift(rng: np.random.Generator) -> np.ndarray:
    """6x12 base from the all-ones 3x6 protograph and random 2x2 permutations"""
    base = np.zeros((2 * BASE_ROWS, 2 * BASE_COLS), dtype=np.uint8)
    swaps = rng.integers(0, 2, size=(BASE_ROWS, BASE_COLS))
    for i in range(BASE_ROWS):
        for j in range(BASE_COLS):
            for a in range(2):
                base[2 * i + a, 2 * j + (a ^ swaps[i, j])] = 1
    return base


def _closes_four_cycle(E: np.ndarray, r: int, c: int, value: int, Z: int) -> bool:
    for r2 in np.nonzero(E[:, c] >= 0)[0]:
        if r2 == r:
            continue
        shared = np.nonzero((E[r] >= 0) & (E[r2] >= 0))[0]
        shared = shared[shared != c]
        if np.any((value - E[r, shared] + E[r2, shared] - E[r2, c]) % Z == 0):
            return True
    return False


def _six_cycles_through(E: np.ndarray, r: int, c: int, value: int, Z: int) -> int:
    count = 0
    rows, cols = E.shape
    for r2 in range(rows):
        if r2 == r or E[r2, c] < 0:
            continue
        for c2 in range(cols):
            if c2 == c or E[r2, c2] < 0:
                continue
            for r3 in range(rows):
                if r3 in (r, r2) or E[r3, c2] < 0:
                    continue
                c3 = np.nonzero((E[r3] >= 0) & (E[r] >= 0))[0]
                c3 = c3[(c3 != c) & (c3 != c2)]
                total = value - E[r2, c] + E[r2, c2] - E[r3, c2] + E[r3, c3] - E[r, c3]
                count += int(np.count_nonzero(total % Z == 0))
    return count


def _assign_exponents(base: np.ndarray, Z: int, rng: np.random.Generator) -> Optional[np.ndarray]:
    """Greedy circulant shifts, column by column; None when an entry has no valid candidate"""
    E = np.full(base.shape, -1, dtype=np.int64)
    for c in range(base.shape[1]):
        for r in np.nonzero(base[:, c])[0]:
            candidates = np.unique(rng.integers(0, Z, size=CANDIDATES_PER_ENTRY))
            best, best_cycles = None, None
            for value in candidates:
                if _closes_four_cycle(E, r, c, int(value), Z):
                    continue
                cycles = _six_cycles_through(E, r, c, int(value), Z)
                if best is None or cycles < best_cycles:
                    best, best_cycles = int(value), cycles
            if best is None:
                return None
            E[r, c] = best
    return E


def has_four_cycles(exponents: np.ndarray, Z: int) -> bool:
    """True if the lifted matrix has girth 4"""
    E = np.asarray(exponents)
    rows, cols = E.shape
    for r1 in range(rows):
        for r2 in range(r1 + 1, rows):
            shared = np.nonzero((E[r1] >= 0) & (E[r2] >= 0))[0]
            for a in range(shared.size):
                for b in range(a + 1, shared.size):
                    c1, c2 = shared[a], shared[b]
                    if (E[r1, c1] - E[r1, c2] + E[r2, c2] - E[r2, c1]) % Z == 0:
                        return True
    return False


def lift(exponents: np.ndarray, Z: int) -> np.ndarray:
    """Expand an exponent matrix (-1 = zero block) into the binary QC matrix"""
    E = np.asarray(exponents)
    rows, cols = E.shape
    H = np.zeros((rows * Z, cols * Z), dtype=np.uint8)
    t = np.arange(Z)
    for r in range(rows):
        for c in range(cols):
            if E[r, c] >= 0:
                H[r * Z + t, c * Z + (t + E[r, c]) % Z] = 1
    return H


def gf2_rref(H: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Reduced row echelon form over GF(2) on bit-packed rows; returns (rref rows, pivot columns)"""
    m, n = H.shape
    packed = np.packbits(np.asarray(H, dtype=np.uint8), axis=1)
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        byte, bit = divmod(col, 8)
        mask = np.uint8(0x80 >> bit)
        hits = np.nonzero(packed[row:, byte] & mask)[0]
        if hits.size == 0:
            continue
        pivot = row + hits[0]
        if pivot != row:
            packed[[row, pivot]] = packed[[pivot, row]]
        others = (packed[:, byte] & mask) != 0
        others[row] = False
        packed[others] ^= packed[row]
        pivots.append(col)
        row += 1
    rref = np.unpackbits(packed[:row], axis=1, count=n)
    return rref, np.asarray(pivots, dtype=np.int64)


def code_from_matrix(H_qc: np.ndarray, lifting: int, seed: int = -1,
                     exponents: Optional[np.ndarray] = None) -> LdpcCode:
    """Systematic form of a parity-check matrix whose rows split into three column-covering layers"""
    H_qc = np.asarray(H_qc, dtype=np.uint8)
    m, n = H_qc.shape
    if m % BASE_ROWS:
        raise CodeConstructionError(f"{m} checks do not split into {BASE_ROWS} layers")
    layer_size = m // BASE_ROWS
    for layer in range(BASE_ROWS):
        cover = H_qc[layer * layer_size:(layer + 1) * layer_size].sum(axis=0)
        if not np.all(cover == 1):
            raise CodeConstructionError(f"layer {layer} does not meet every variable exactly once")
    row_weights = H_qc.sum(axis=1)
    if not np.all(row_weights == row_weights[0]):
        raise CodeConstructionError("check degrees are not uniform")

    rref, pivots = gf2_rref(H_qc)
    rank = pivots.size
    free = np.setdiff1d(np.arange(n), pivots)
    k = n // 2
    if free.size < k:
        raise CodeConstructionError(f"rank {rank} leaves {free.size} free bits, fewer than {k}")

    permutation = np.concatenate([free, pivots])
    position = np.empty(n, dtype=np.int64)
    position[permutation] = np.arange(n)
    columns = np.nonzero(H_qc)[1].reshape(m, int(row_weights[0]))
    check_index = position[columns]

    if exponents is None:
        exponents = np.zeros((0, 0), dtype=np.int64)
    return LdpcCode(
        n=n, k=k, lifting=int(lifting), seed=int(seed),
        exponents=np.asarray(exponents),
        check_index=check_index,
        permutation=permutation,
        parity_map=rref[:, free].astype(np.uint8),
        rank=int(rank),
    )


def construct_code(seed: int = 0, lifting: int = DEFAULT_LIFTING) -> LdpcCode:
    """Deterministic given (seed, lifting); tries seed, seed+1, ... on failure"""
    Z = int(lifting)
    if Z < 2:
        raise ValueError(f"lifting must be at least 2, got {lifting}")

    for attempt in range(MAX_SEED_ATTEMPTS):
        current = int(seed) + attempt
        rng = np.random.default_rng(current)
        exponents = _assign_exponents(_two_lift(rng), Z, rng)
        if exponents is None:
            logger.warning(f"Exponent search failed for seed {current}, retrying")
            continue
        code = code_from_matrix(lift(exponents, Z), Z, current, exponents)
        logger.info(f"Constructed LDPC code n={code.n} k={code.k} rank={code.rank} "
                    f"frozen={code.num_frozen} (seed {current})")
        return code

    raise CodeConstructionError(f"no valid code after {MAX_SEED_ATTEMPTS} seeds starting at {seed}")


def encode(code: LdpcCode, info_bits: np.ndarray) -> np.ndarray:
    """Systematic codeword [message | zeros | parity]"""
    info_bits = np.asarray(info_bits, dtype=np.uint8).reshape(-1)
    if info_bits.size != code.k:
        raise ValueError(f"expected {code.k} information bits, got {info_bits.size}")
    systematic = np.zeros(code.n - code.rank, dtype=np.int64)
    systematic[:code.k] = info_bits
    parity = (code.parity_map.astype(np.int64) @ systematic) & 1
    return np.concatenate([systematic, parity]).astype(np.uint8)


def syndrome(code: LdpcCode, bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    return np.bitwise_xor.reduce(bits[code.check_index], axis=1)


def _check_messages(q: np.ndarray) -> np.ndarray:
    """Exact sum-product check update with leave-one-out tanh products along axis 1"""
    t = np.tanh(q / 2.0)
    prefix = np.cumprod(np.concatenate([np.ones_like(t[:, :1]), t[:, :-1]], axis=1), axis=1)
    suffix = np.cumprod(np.concatenate([np.ones_like(t[:, :1]), t[:, :0:-1]], axis=1), axis=1)[:, ::-1]
    product = np.clip(prefix * suffix, -_TANH_LIMIT, _TANH_LIMIT)
    return 2.0 * np.arctanh(product)


def decode_layered_bp(code: LdpcCode, llrs: np.ndarray, max_iters: int = 50,
                      schedule: str = LAYERED) -> DecodeResult:
    """
    Sum-product decoding; positive LLR means bit 0.

    Stops when the syndrome is zero after a full iteration. Frozen bits are
    known zeros and enter with the maximum LLR.
    """
    llrs = np.clip(np.asarray(llrs, dtype=float).reshape(-1), -LLR_CLIP, LLR_CLIP)
    if llrs.size != code.n:
        raise ValueError(f"expected {code.n} LLRs, got {llrs.size}")
    if schedule not in (LAYERED, FLOODING):
        raise ValueError(f"unknown schedule {schedule!r}")
    llrs = llrs.copy()
    llrs[code.k:code.n - code.rank] = LLR_CLIP

    posterior = llrs.copy()
    index = code.check_index
    messages = np.zeros(index.shape)
    layer_rows = np.split(np.arange(code.m), BASE_ROWS)
    bits = (posterior < 0).astype(np.uint8)

    for iteration in range(1, max_iters + 1):
        if schedule == LAYERED:
            for rows in layer_rows:
                idx = index[rows]
                q = posterior[idx] - messages[rows]
                messages[rows] = _check_messages(q)
                posterior[idx] = q + messages[rows]
        else:
            q = posterior[index] - messages
            messages = _check_messages(q)
            posterior = llrs + np.bincount(index.reshape(-1), weights=messages.reshape(-1), minlength=code.n)

        bits = (posterior < 0).astype(np.uint8)
        if not syndrome(code, bits).any():
            return DecodeResult(bits, True, iteration)

    logger.debug(f"BP did not converge in {max_iters} iterations")
    return DecodeResult(bits, False, max_iters)


def write_alist(code: LdpcCode, path: Path) -> Path:
    """MacKay alist of the codeword-order parity-check matrix"""
    H = code.H
    m, n = H.shape
    col_rows = [np.nonzero(H[:, j])[0] + 1 for j in range(n)]
    row_cols = [np.nonzero(H[i])[0] + 1 for i in range(m)]
    max_col = max(len(r) for r in col_rows)
    max_row = max(len(c) for c in row_cols)

    def padded(entries, width):
        return ' '.join(str(int(v)) for v in list(entries) + [0] * (width - len(entries)))

    lines = [f"{n} {m}", f"{max_col} {max_row}",
             ' '.join(str(len(r)) for r in col_rows),
             ' '.join(str(len(c)) for c in row_cols)]
    lines += [padded(r, max_col) for r in col_rows]
    lines += [padded(c, max_row) for c in row_cols]

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text('\n'.join(lines) + '\n')
    return path


def read_alist(path: Path) -> np.ndarray:
    """Dense binary parity-check matrix from an alist file"""
    tokens = [int(t) for t in Path(path).read_text().split()]
    n, m, max_col, max_row = tokens[:4]
    pos = 4 + n + m
    H = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        rows = [r for r in tokens[pos:pos + max_col] if r > 0]
        H[np.asarray(rows, dtype=np.int64) - 1, j] = 1
        pos += max_col
    return H


def code_from_alist(path: Path, lifting: int = 0) -> LdpcCode:
    """Rebuild a code from an exported matrix; the codeword order is re-derived"""
    return code_from_matrix(read_alist(path), lifting)
