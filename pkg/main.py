#!/usr/bin/env python3
"""
Zak-OTFS link simulator - Main Entry Point

Runs RPE heatmaps and BER sweeps of LDPC-coded Zak-OTFS with model-free
acquisition, and exports the pulsone and the code for inspection.
"""

import argparse
import asyncio
import signal
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Add current directory to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from utils.logger import APP_LOGGER, setup_logger
from zakotfs.allocation import AllocationError
from zakotfs.command_handler import CommandHandler, UnknownCommandError
from zakotfs.config import ConfigError, load_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_OUTPUT = 2
EXIT_INTERRUPTED = 130


class ZakOtfsSimulator:
    """Main class that loads the config and runs one command"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = None
        self.logger = None
        self.command_handler = None

    def load_config(self):
        """Load configuration; CLI flags override the file and the environment"""
        overrides = {}
        if self.args.seed is not None:
            overrides.setdefault('experiment', {})['seed'] = self.args.seed
        if self.args.workers is not None:
            overrides.setdefault('experiment', {})['workers'] = self.args.workers
        if self.args.out is not None:
            overrides['output'] = {'directory': self.args.out}
        self.config = load_config(self.args.config, overrides)

    def setup_logging(self):
        """Setup logging system"""
        self.logger = setup_logger(APP_LOGGER, self.config.raw)
        self.logger.info("Logging system initialized")

    def setup_components(self):
        self.command_handler = CommandHandler(self.config, self.logger)
        params = self.config.lattice
        self.logger.info(f"Lattice M={params.M}, N={params.N}, modem={self.config.modem}, "
                         f"filter={self.config.filter.kind}, workers={self.config.workers}")

    async def run(self) -> List[Path]:
        return await self.command_handler.handle_command(self.args.command)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Zak-OTFS link simulator")
    parser.add_argument('command', choices=['heatmap', 'sweep-doppler', 'sweep-snr', 'pulsone-dump', 'code-export'])
    parser.add_argument('--config', default=None, help="config file (default: $ZAKOTFS_CONFIG or config.yaml)")
    parser.add_argument('--seed', type=int, default=None, help="master seed")
    parser.add_argument('--out', default=None, help="output directory")
    parser.add_argument('--workers', type=int, default=None, help="worker processes")
    return parser


def signal_handler(signum, frame):
    """Handle shutdown signals"""
    print("\nReceived shutdown signal. Stopping...")
    raise KeyboardInterrupt


async def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    simulator = ZakOtfsSimulator(args)

    # Load configuration
    try:
        simulator.load_config()
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    # Setup logging
    try:
        simulator.setup_logging()
    except OSError as e:
        print(f"Cannot open log file: {e}", file=sys.stderr)
        return EXIT_OUTPUT

    signal.signal(signal.SIGTERM, signal_handler)

    try:
        simulator.setup_components()
        outputs = await simulator.run()
        for path in outputs:
            simulator.logger.info(f"Output: {path}")
        return EXIT_OK

    except (ConfigError, UnknownCommandError, AllocationError) as e:
        simulator.logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except OSError as e:
        simulator.logger.error(f"Cannot write output: {e}")
        return EXIT_OUTPUT
    except KeyboardInterrupt:
        simulator.logger.info("Received keyboard interrupt")
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    exit_code = asyncio.run(main())
    sys.exit(exit_code)
