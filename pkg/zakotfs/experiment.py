"""
Monte Carlo BER engine.

A trial draws one channel, acquires it from a pilot frame and then sends one
data frame per scheme through that channel, all schemes sharing the same
information bits and noise draw. Trials run in worker processes in batches of
fixed size and are reduced in trial order, so results do not depend on the
worker count.
"""

import asyncio
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from utils.helpers import child_generators, noise_psd, trial_seed, write_csv

from .acquisition import ChannelMatrix, build_H, estimate_h_eff, pilot_frame
from .allocation import RPE, STRIP, AllocationMap, make_allocation, map_symbols
from .channel import add_noise, apply_td, compute_h_eff, draw_veh_a
from .config import ExperimentConfig
from .equalizer import hard_decisions, mmse_equalize, qam4_llrs
from .lattice import DDSignal, DDTapSet, twisted_convolve, vectorize
from .ldpc import LdpcCode, construct_code, decode_layered_bp, encode
from .mcotfs import build_periodic_H, estimate_periodic_kernel, mc_channel_matrix, mc_transceive
from .rpe_cache import RpeMapCache
from .stopping import StoppingRule
from .zak import inverse_zak

RESULT_HEADER = ('scheme', 'modem', 'acquisition', 'filter', 'nu_max', 'snr_db', 'frames',
                 'bit_errors', 'ber', 'frame_errors', 'fer', 'mean_iterations')
HEATMAP_HEADER = ('nu_max', 'k', 'l', 'rpe')
SUMMARY_HEADER = ('nu_max', 'low_rpe_fraction', 'centroid_k', 'centroid_l', 'centroid_row_offset',
                  'reliable_centroid_l', 'reliable_row_offset')

LOW_RPE = 0.1

# Per-process state set by init_worker
_WORKER: Dict[str, object] = {}


@dataclass(frozen=True)
class ResultRow:
    """Aggregate of one (scheme, nu_max, snr) point; errors counted on information bits"""

    scheme: str
    modem: str
    acquisition: str
    filter: str
    nu_max: float
    snr_db: float
    frames: int
    info_bits: int
    bit_errors: int
    frame_errors: int
    iterations: int

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.info_bits * self.frames) if self.frames else float('nan')

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else float('nan')

    @property
    def mean_iterations(self) -> float:
        return self.iterations / self.frames if self.frames else float('nan')

    def as_row(self) -> tuple:
        return (self.scheme, self.modem, self.acquisition, self.filter, float(self.nu_max), float(self.snr_db),
                self.frames, self.bit_errors, self.ber, self.frame_errors, self.fer, self.mean_iterations)


def init_worker(config: ExperimentConfig, code: LdpcCode):
    """Process-pool initializer: keep the config and the code for every trial"""
    _WORKER['config'] = config
    _WORKER['code'] = code


def _true_taps(config: ExperimentConfig, ch) -> DDTapSet:
    return compute_h_eff(ch, config.filter, config.filter, config.lattice, config.oversampling, config.tap_floor)


def channel_response(config: ExperimentConfig, ch, taps: Optional[DDTapSet] = None) -> Callable[[DDSignal], DDSignal]:
    """Noise-free DD -> channel -> DD map for the configured modem and channel path"""
    params = config.lattice
    if config.modem == 'mc':
        return lambda x: mc_transceive(ch, x, params)
    if config.channel_path == 'td':
        return lambda x: apply_td(ch, inverse_zak(x), config.filter, config.filter, params, config.oversampling)
    taps = taps if taps is not None else _true_taps(config, ch)
    return lambda x: twisted_convolve(taps, x)


def acquire(config: ExperimentConfig, ch, received_pilot: DDSignal, N0: float,
            taps: Optional[DDTapSet] = None) -> ChannelMatrix:
    """Receiver's channel matrix: pilot read-off, or the true channel for genie acquisition"""
    params = config.lattice
    if config.acquisition == 'genie':
        if config.modem == 'mc':
            return mc_channel_matrix(ch, params)
        return build_H(taps if taps is not None else _true_taps(config, ch), params)

    cfg = config.pilot_config()
    pilot_N0 = N0 if config.pilot_noisy else 0.0
    if config.modem == 'mc':
        return build_periodic_H(estimate_periodic_kernel(received_pilot, cfg, pilot_N0), params)
    return build_H(estimate_h_eff(received_pilot, cfg, pilot_N0), params)


def run_trial(config: ExperimentConfig, code: LdpcCode, maps: Dict[str, AllocationMap],
              nu_max: float, snr_db: float, key: Tuple[int, ...]) -> Dict[str, Tuple[int, int, int]]:
    """One frame per scheme; returns scheme -> (bit errors, frame error, decoder iterations)"""
    rng_channel, rng_pilot, rng_bits, rng_noise = child_generators(trial_seed(config.seed, *key), 4)
    params = config.lattice
    E_T = config.symbol_energy
    N0 = noise_psd(snr_db, E_T)

    ch = draw_veh_a(config.profile(nu_max), rng_channel)
    taps = None
    if config.modem == 'zak' and (config.channel_path == 'dd' or config.acquisition == 'genie'):
        taps = _true_taps(config, ch)
    respond = channel_response(config, ch, taps)

    received_pilot = respond(pilot_frame(params, config.pilot_config()))
    if config.pilot_noisy:
        received_pilot = add_noise(received_pilot, N0, rng_pilot)
    H = acquire(config, ch, received_pilot, N0, taps)

    info = rng_bits.integers(0, 2, size=code.k, dtype=np.uint8)
    codeword = encode(code, info)
    noise = add_noise(DDSignal.zeros(params), N0, rng_noise).samples

    outcomes = {}
    for scheme in config.schemes:
        amap = maps[scheme.name]
        x = map_symbols(codeword if scheme.coded else info, amap, E_T)
        y = vectorize(DDSignal(params, respond(x).samples + noise))
        out = mmse_equalize(H, y, E_T, N0, amap.active_mask())
        llrs = qam4_llrs(out, amap)
        if scheme.coded:
            result = decode_layered_bp(code, llrs, config.max_iters, config.schedule)
            decided, iterations = result.bits[:code.k], result.iterations
        else:
            decided, iterations = hard_decisions(llrs), 0
        errors = int(np.count_nonzero(decided != info))
        outcomes[scheme.name] = (errors, int(errors > 0), iterations)
    return outcomes


def run_trial_task(maps: Dict[str, AllocationMap], nu_max: float, snr_db: float,
                   key: Tuple[int, ...]) -> Dict[str, Tuple[int, int, int]]:
    return run_trial(_WORKER['config'], _WORKER['code'], maps, nu_max, snr_db, key)


def rpe_summary(rpe_map: np.ndarray, pilot_row: int, threshold: float = LOW_RPE) -> Dict[str, float]:
    """Fraction of bins below threshold and the centroid of those bins; undefined bins count as high.

    The reliable half (bins at or below the median RPE) gets its own row centroid, which stays
    informative when every bin falls below the threshold.
    """
    rpe_map = np.asarray(rpe_map, dtype=float)
    finite = np.isfinite(rpe_map)
    low = finite & (rpe_map < threshold)
    stats = {'low_rpe_fraction': float(low.mean()), 'centroid_k': float('nan'), 'centroid_l': float('nan'),
             'centroid_row_offset': float('nan'), 'reliable_centroid_l': float('nan'),
             'reliable_row_offset': float('nan')}
    if low.any():
        k, l = np.nonzero(low)
        stats.update(centroid_k=float(k.mean()), centroid_l=float(l.mean()),
                     centroid_row_offset=float(abs(l.mean() - pilot_row)))
    if finite.any():
        _, l = np.nonzero(finite & (rpe_map <= np.median(rpe_map[finite])))
        stats.update(reliable_centroid_l=float(l.mean()), reliable_row_offset=float(abs(l.mean() - pilot_row)))
    return stats


def _plain(value):
    """numpy scalars and tuples to YAML-safe Python values"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


class ExperimentRunner:
    """Owns the code, the worker pool and the RPE cache for one CLI invocation"""

    def __init__(self, config: ExperimentConfig, logger):
        self.config = config
        self.logger = logger
        self.code: Optional[LdpcCode] = None
        self.executor: Optional[ProcessPoolExecutor] = None
        self.rpe_cache: Optional[RpeMapCache] = None

        self.points: List[dict] = []
        self.outputs: List[str] = []
        self.start_time = time.time()

    async def __aenter__(self):
        self.start()
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        self.close()

    def start(self):
        config = self.config
        self.code = construct_code(config.ldpc_seed, config.lifting)
        self.logger.info(f"LDPC code ready: n={self.code.n}, k={self.code.k}, frozen={self.code.num_frozen}")

        init_worker(config, self.code)
        if config.workers > 1:
            self.executor = ProcessPoolExecutor(max_workers=config.workers, initializer=init_worker,
                                                initargs=(config, self.code))
            self.logger.info(f"Worker pool started with {config.workers} processes")
        self.rpe_cache = RpeMapCache(config, self.executor)

    def close(self):
        if self.executor:
            self.executor.shutdown()
            self.executor = None

    async def allocation_maps(self, nu_max: float) -> Dict[str, AllocationMap]:
        """Map per scheme; uncoded schemes carry the information symbols only"""
        config = self.config
        params = config.lattice
        pilot_row = config.pilot_config().l_p
        rpe_map = await self.rpe_cache.get(nu_max) if config.needs_rpe else None

        maps = {}
        for scheme in config.schemes:
            strategy = scheme.allocation
            if not scheme.coded and strategy != RPE:
                # standard and strip coincide when only information symbols are sent
                strategy = STRIP
            amap = make_allocation(strategy, params, self.code, pilot_row=pilot_row, rpe_map=rpe_map)
            maps[scheme.name] = amap if scheme.coded else amap.info_only()
        return maps

    async def _run_batch(self, maps, nu_max: float, snr_db: float, point: Tuple[int, int],
                         trials: Sequence[int]) -> List[Dict[str, Tuple[int, int, int]]]:
        if self.executor is None:
            return [run_trial(self.config, self.code, maps, nu_max, snr_db, point + (t,)) for t in trials]
        loop = asyncio.get_running_loop()
        return await asyncio.gather(*[
            loop.run_in_executor(self.executor, run_trial_task, maps, nu_max, snr_db, point + (t,))
            for t in trials
        ])

    async def run_ber_point(self, nu_max: float, snr_db: float,
                            point: Tuple[int, int] = (0, 0)) -> List[ResultRow]:
        """All schemes at one (nu_max, snr) point, stopped by the StoppingRule"""
        config = self.config
        start = time.time()
        maps = await self.allocation_maps(nu_max)
        rule = StoppingRule.from_config(config)
        totals = {scheme.name: [0, 0, 0] for scheme in config.schemes}

        while True:
            batch = rule.next_batch()
            if not batch:
                break
            outcomes = await self._run_batch(maps, nu_max, snr_db, point, batch)
            batch_errors = {name: 0 for name in totals}
            for outcome in outcomes:
                for name, (errors, frame_error, iterations) in outcome.items():
                    totals[name][0] += errors
                    totals[name][1] += frame_error
                    totals[name][2] += iterations
                    batch_errors[name] += errors
            rule.record(batch_errors, len(batch))

        elapsed = time.time() - start
        self.points.append({'nu_max': nu_max, 'snr_db': snr_db, 'frames': rule.frames,
                            'seconds': round(elapsed, 3)})
        self.logger.info(f"Point nu_max={nu_max:.0f}Hz snr={snr_db:.1f}dB: {rule.frames} frames in {elapsed:.1f}s")

        rows = []
        for scheme in config.schemes:
            errors, frame_errors, iterations = totals[scheme.name]
            row = ResultRow(scheme.name, config.modem, config.acquisition, config.filter.kind, nu_max, snr_db,
                            rule.frames, self.code.k, errors, frame_errors, iterations)
            self.logger.debug(f"  {scheme.name}: BER={row.ber:.3e} FER={row.fer:.3e}")
            rows.append(row)
        return rows

    async def run_sweep(self, nu_list: Sequence[float], snr_list: Sequence[float], name: str) -> Path:
        """nu_max x SNR x scheme grid written as one CSV"""
        rows: List[ResultRow] = []
        total = len(nu_list) * len(snr_list)
        for i, nu_max in enumerate(nu_list):
            for j, snr_db in enumerate(snr_list):
                self.logger.info(f"[{i * len(snr_list) + j + 1}/{total}] {name}")
                rows.extend(await self.run_ber_point(float(nu_max), float(snr_db), (i, j)))

        path = write_csv(self.config.output_dir / f"{name}.csv", RESULT_HEADER,
                         [row.as_row() for row in rows], self.config.digest)
        self.outputs.append(str(path))
        self.logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    async def run_heatmap(self, nu_list: Optional[Sequence[float]] = None) -> Path:
        """Averaged RPE per bin for each nu_max, plus a per-nu_max summary"""
        config = self.config
        nu_list = config.heatmap_nu_max if nu_list is None else nu_list
        pilot_row = config.pilot_config().l_p
        M, N = config.lattice.M, config.lattice.N

        rows, summary = [], []
        for nu_max in nu_list:
            rpe_map = await self.rpe_cache.get(float(nu_max))
            rows.extend((float(nu_max), k, l, float(rpe_map[k, l])) for l in range(N) for k in range(M))
            stats = rpe_summary(rpe_map, pilot_row, config.low_rpe_threshold)
            summary.append((float(nu_max),) + tuple(stats[key] for key in SUMMARY_HEADER[1:]))
            self.logger.info(f"nu_max={nu_max:.0f}Hz: {100 * stats['low_rpe_fraction']:.1f}% of bins below RPE "
                             f"{config.low_rpe_threshold}, mean RPE {np.nanmean(rpe_map):.3e}")

        path = write_csv(config.output_dir / 'heatmap.csv', HEATMAP_HEADER, rows, config.digest)
        summary_path = write_csv(config.output_dir / 'heatmap_summary.csv', SUMMARY_HEADER, summary, config.digest)
        self.outputs.extend([str(path), str(summary_path)])
        return path

    def write_meta(self, command: str) -> Path:
        """Run metadata, including wall time, kept out of the CSVs"""
        config = self.config
        meta = {
            'command': command,
            'config_hash': config.digest,
            'seed': config.seed,
            'workers': config.workers,
            'wall_time_s': round(time.time() - self.start_time, 3),
            'lattice': config.lattice.describe(),
            'filter': {'kind': config.filter.kind, **config.filter.expansion(config.lattice)},
            'code': self.code.describe() if self.code else None,
            'points': self.points,
            'rpe_cache': self.rpe_cache.get_stats() if self.rpe_cache else None,
            'outputs': self.outputs,
        }
        path = config.output_dir / 'run_meta.yaml'
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as f:
            yaml.safe_dump(_plain(meta), f, sort_keys=False)
        return path
