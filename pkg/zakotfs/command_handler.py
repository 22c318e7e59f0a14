from pathlib import Path
from typing import List

import numpy as np
import yaml

from utils.helpers import write_csv

from .allocation import STANDARD, STRIP, make_allocation, write_allocation_csv
from .config import ExperimentConfig
from .experiment import ExperimentRunner
from .ldpc import construct_code, write_alist
from .zak import forward_zak, pulsone


class UnknownCommandError(ValueError):
    pass


class CommandHandler:
    """Dispatches CLI subcommands to the experiment runner and the export helpers"""

    def __init__(self, config: ExperimentConfig, logger):
        self.config = config
        self.logger = logger

        # Register commands
        self.commands = {
            'heatmap': self._cmd_heatmap,
            'sweep-doppler': self._cmd_sweep_doppler,
            'sweep-snr': self._cmd_sweep_snr,
            'pulsone-dump': self._cmd_pulsone_dump,
            'code-export': self._cmd_code_export,
        }

    async def handle_command(self, command: str) -> List[Path]:
        """Run a command and return the files it wrote"""
        if command not in self.commands:
            raise UnknownCommandError(f"Unknown command: {command}. Available: {', '.join(self.commands)}")

        self.logger.info(f"Running {command} (config hash {self.config.digest[:12]})")
        return await self.commands[command]()

    async def _run(self, command: str, job) -> List[Path]:
        async with ExperimentRunner(self.config, self.logger) as runner:
            await job(runner)
            meta = runner.write_meta(command)
            return [Path(p) for p in runner.outputs] + [meta]

    async def _cmd_heatmap(self) -> List[Path]:
        """RPE heatmaps at every configured nu_max"""
        return await self._run('heatmap', lambda runner: runner.run_heatmap())

    async def _cmd_sweep_doppler(self) -> List[Path]:
        """BER versus nu_max at the configured SNR"""
        config = self.config
        return await self._run('sweep-doppler',
                               lambda runner: runner.run_sweep(config.nu_max_list, [config.snr_db], 'sweep_doppler'))

    async def _cmd_sweep_snr(self) -> List[Path]:
        """BER versus SNR at sweep_snr_nu_max"""
        config = self.config
        return await self._run('sweep-snr',
                               lambda runner: runner.run_sweep([config.sweep_snr_nu_max], config.snr_list, 'sweep_snr'))

    async def _cmd_pulsone_dump(self) -> List[Path]:
        """Time-domain samples of the pilot pulsone and its DD read-back"""
        config = self.config
        params = config.lattice
        cfg = config.pilot_config()
        frame = pulsone(params, cfg.k_p, cfg.l_p, cfg.energy)
        dd = forward_zak(frame).samples
        floor = 1e-9 * np.abs(dd).max()

        td_rows = [(q, float(t), float(s.real), float(s.imag))
                   for q, (t, s) in enumerate(zip(frame.sample_times, frame.core))]
        dd_rows = [(k, l, float(dd[k, l].real), float(dd[k, l].imag))
                   for l in range(params.N) for k in range(params.M) if np.abs(dd[k, l]) > floor]
        out = config.output_dir
        paths = [
            write_csv(out / 'pulsone_td.csv', ('sample', 'time_s', 'real', 'imag'), td_rows, config.digest),
            write_csv(out / 'pulsone_dd.csv', ('k', 'l', 'real', 'imag'), dd_rows, config.digest),
        ]
        self.logger.info(f"Pulsone at ({cfg.k_p}, {cfg.l_p}) written: {len(td_rows)} samples")
        return paths

    async def _cmd_code_export(self) -> List[Path]:
        """alist of the LDPC code, its exponents and the deterministic allocation maps"""
        config = self.config
        out = config.output_dir
        code = construct_code(config.ldpc_seed, config.lifting)

        paths = [write_alist(code, out / 'ldpc.alist')]
        meta_path = out / 'ldpc.yaml'
        with open(meta_path, 'w') as f:
            yaml.safe_dump({**code.describe(), 'exponents': code.exponents.tolist()}, f, sort_keys=False)
        paths.append(meta_path)

        pilot_row = config.pilot_config().l_p
        for strategy in (STANDARD, STRIP):
            amap = make_allocation(strategy, config.lattice, code, pilot_row=pilot_row)
            paths.append(write_allocation_csv(amap, out / f"allocation_{strategy}.csv", config.digest))

        self.logger.info(f"Exported code n={code.n}, k={code.k} and {len(paths) - 2} allocation maps")
        return paths
