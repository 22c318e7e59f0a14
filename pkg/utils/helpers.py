import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np


def db_to_linear(db):
    """Convert decibels to a linear power ratio"""
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def noise_psd(snr_db: float, symbol_energy: float = 1.0) -> float:
    """N0 for a given E_T/N0 in dB"""
    return float(symbol_energy / db_to_linear(snr_db))


def trial_seed(master_seed: int, *key: int) -> np.random.SeedSequence:
    """Fixed splitting rule: one SeedSequence per (point..., trial) key"""
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))


def child_generators(seed: np.random.SeedSequence, count: int) -> List[np.random.Generator]:
    """Independent generators spawned from a trial seed, in a fixed order"""
    return [np.random.default_rng(s) for s in seed.spawn(count)]


def config_hash(config: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a config dict"""
    canonical = json.dumps(config, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def format_value(value: Any) -> str:
    """Stable text form for CSV cells"""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if np.isnan(value):
            return 'nan'
        return f"{float(value):.6e}"
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]],
              digest: Optional[str] = None) -> Path:
    """Write rows to CSV, optionally preceded by a config hash line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, 'w', newline='') as f:
        if digest:
            f.write(f"# config_hash={digest}\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])

    return path


def q_function(x):
    """Gaussian tail probability Q(x)"""
    from scipy.special import erfc
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def qam4_ber(snr_db):
    """Analytic Gray 4-QAM BER over AWGN for E_T/N0 in dB"""
    return q_function(np.sqrt(db_to_linear(snr_db)))


def bpsk_ber(ebn0_db):
    """Analytic BPSK BER over AWGN for Eb/N0 in dB"""
    return q_function(np.sqrt(2.0 * db_to_linear(ebn0_db)))
