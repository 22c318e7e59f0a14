"""Experiment configuration: YAML loading, environment overrides and validation."""

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from utils.helpers import config_hash

from .acquisition import AcquisitionError, PilotConfig
from .allocation import STRATEGIES
from .channel import VEH_A_DELAYS_US, VEH_A_POWERS_DB, VehAProfile
from .filters import FilterSpec
from .lattice import LatticeError, LatticeParams
from .ldpc import FLOODING, LAYERED

ENV_CONFIG = 'ZAKOTFS_CONFIG'
ENV_WORKERS = 'ZAKOTFS_WORKERS'
ENV_OUT = 'ZAKOTFS_OUT'

MODEMS = ('zak', 'mc')
CODINGS = ('uncoded', 'coded')
CHANNEL_PATHS = ('td', 'dd')
ACQUISITIONS = ('estimated', 'genie')

DEFAULT_SCHEMES = ('uncoded-standard', 'uncoded-rpe', 'coded-standard', 'coded-strip', 'coded-rpe')

DEFAULTS: Dict[str, Any] = {
    'lattice': {
        'bandwidth': 960000.0,
        'duration': 0.0016,
        'doppler_period': 30000.0,
    },
    'filter': {
        'kind': 'sinc',
        'beta_tau': 0.0,
        'beta_nu': 0.0,
        'trunc_tau': None,
        'trunc_nu': None,
        'oversampling': 16,
    },
    'channel': {
        'delays_us': list(VEH_A_DELAYS_US),
        'powers_db': list(VEH_A_POWERS_DB),
        'path': 'td',
        'tap_floor': 1.0e-5,
    },
    'pilot': {
        'k_p': None,
        'l_p': None,
        'energy': None,
        'region_k': None,
        'region_l': None,
        'threshold_sigmas': 3.0,
        'noisy': True,
    },
    'ldpc': {
        'seed': 0,
        'lifting': 251,
        'max_iters': 50,
        'schedule': LAYERED,
    },
    'experiment': {
        'seed': 2024,
        'modem': 'zak',
        'acquisition': 'estimated',
        'schemes': list(DEFAULT_SCHEMES),
        'symbol_energy': 1.0,
        'snr_db': 13.0,
        'snr_list': [5.0, 7.0, 9.0, 11.0, 13.0, 15.0],
        'nu_max_list': [500.0, 4500.0, 8500.0, 10500.0, 12000.0, 14000.0, 14500.0],
        'sweep_snr_nu_max': 14500.0,
        'heatmap_nu_max': [500.0, 4500.0, 12000.0],
        'rpe_realizations': 100,
        'low_rpe_threshold': 0.1,
        'trials': 200,
        'min_errors': 100,
        'batch_size': 8,
        'workers': 4,
    },
    'output': {
        'directory': 'results',
    },
    'logging': {
        'level': 'INFO',
        'console': True,
        'file': None,
    },
}


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration"""


@dataclass(frozen=True)
class Scheme:
    """A coding / allocation pair such as coded-strip"""

    coding: str
    allocation: str

    @classmethod
    def parse(cls, name: str) -> 'Scheme':
        parts = str(name).lower().split('-')
        if len(parts) != 2 or parts[0] not in CODINGS or parts[1] not in STRATEGIES:
            raise ConfigError(f"experiment.schemes: invalid scheme {name!r} "
                              f"(expected <{'|'.join(CODINGS)}>-<{'|'.join(STRATEGIES)}>)")
        return cls(parts[0], parts[1])

    @property
    def coded(self) -> bool:
        return self.coding == 'coded'

    @property
    def name(self) -> str:
        return f"{self.coding}-{self.allocation}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration; `raw` is the merged dict the hash is taken over"""

    lattice: LatticeParams
    filter: FilterSpec
    oversampling: int
    delays_us: Tuple[float, ...]
    powers_db: Tuple[float, ...]
    channel_path: str
    tap_floor: float
    pilot: Dict[str, Any]
    pilot_noisy: bool
    ldpc_seed: int
    lifting: int
    max_iters: int
    schedule: str
    seed: int
    modem: str
    acquisition: str
    schemes: Tuple[Scheme, ...]
    symbol_energy: float
    snr_db: float
    snr_list: Tuple[float, ...]
    nu_max_list: Tuple[float, ...]
    sweep_snr_nu_max: float
    heatmap_nu_max: Tuple[float, ...]
    rpe_realizations: int
    low_rpe_threshold: float
    trials: int
    min_errors: int
    batch_size: int
    workers: int
    output_dir: Path
    raw: Dict[str, Any] = field(repr=False, compare=False, default_factory=dict)

    def profile(self, nu_max: float) -> VehAProfile:
        return VehAProfile(nu_max=nu_max, delays_us=self.delays_us, powers_db=self.powers_db)

    def pilot_config(self) -> PilotConfig:
        return PilotConfig(self.lattice, symbol_energy=self.symbol_energy, **self.pilot)

    @property
    def digest(self) -> str:
        """Hash of everything that changes results (output and logging excluded)"""
        relevant = {key: value for key, value in self.raw.items() if key not in ('output', 'logging')}
        relevant['experiment'] = {key: value for key, value in relevant.get('experiment', {}).items()
                                  if key != 'workers'}
        return config_hash(relevant)

    @property
    def needs_rpe(self) -> bool:
        return any(s.allocation == 'rpe' for s in self.schemes)


def _merge(defaults: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(defaults)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _number(section: Dict[str, Any], key: str, name: str, kind=float, minimum=None, optional=False):
    value = section.get(key)
    if value is None and optional:
        return None
    try:
        value = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}.{key}: expected {kind.__name__}, got {section.get(key)!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name}.{key}: must be at least {minimum}, got {value}")
    return value


def _float_list(section: Dict[str, Any], key: str, name: str, minimum=None) -> Tuple[float, ...]:
    values = section.get(key)
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(f"{name}.{key}: expected a non-empty list")
    try:
        values = tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}.{key}: entries must be numbers, got {values!r}")
    if minimum is not None and min(values) < minimum:
        raise ConfigError(f"{name}.{key}: entries must be at least {minimum}")
    return values


def _choice(section: Dict[str, Any], key: str, name: str, options) -> str:
    value = str(section.get(key)).lower()
    if value not in options:
        raise ConfigError(f"{name}.{key}: must be one of {list(options)}, got {section.get(key)!r}")
    return value


def validate(raw: Dict[str, Any]) -> ExperimentConfig:
    """Turn a merged config dict into an ExperimentConfig or raise ConfigError"""
    lat, flt, chan = raw['lattice'], raw['filter'], raw['channel']
    pil, code, exp = raw['pilot'], raw['ldpc'], raw['experiment']

    try:
        lattice = LatticeParams(
            bandwidth=_number(lat, 'bandwidth', 'lattice'),
            duration=_number(lat, 'duration', 'lattice'),
            doppler_period=_number(lat, 'doppler_period', 'lattice'),
        )
    except LatticeError as e:
        raise ConfigError(f"lattice: {e}")

    try:
        spec = FilterSpec(
            kind=flt.get('kind', 'sinc'),
            beta_tau=_number(flt, 'beta_tau', 'filter', minimum=0.0),
            beta_nu=_number(flt, 'beta_nu', 'filter', minimum=0.0),
            trunc_tau=_number(flt, 'trunc_tau', 'filter', int, 1, optional=True),
            trunc_nu=_number(flt, 'trunc_nu', 'filter', int, 1, optional=True),
        )
    except ValueError as e:
        raise ConfigError(f"filter: {e}")

    delays = _float_list(chan, 'delays_us', 'channel', minimum=0.0)
    powers = _float_list(chan, 'powers_db', 'channel')
    if len(delays) != len(powers):
        raise ConfigError("channel.delays_us and channel.powers_db must have the same length")

    pilot = {key: pil.get(key) for key in ('k_p', 'l_p', 'energy', 'region_k', 'region_l')}
    pilot['threshold_sigmas'] = _number(pil, 'threshold_sigmas', 'pilot', minimum=0.0)
    for key in ('k_p', 'l_p', 'region_k', 'region_l'):
        pilot[key] = _number(pil, key, 'pilot', int, optional=True)
    pilot['energy'] = _number(pil, 'energy', 'pilot', optional=True)

    schemes = exp.get('schemes')
    if not isinstance(schemes, (list, tuple)) or not schemes:
        raise ConfigError("experiment.schemes: expected a non-empty list")

    config = ExperimentConfig(
        lattice=lattice,
        filter=spec,
        oversampling=_number(flt, 'oversampling', 'filter', int, 1),
        delays_us=delays,
        powers_db=powers,
        channel_path=_choice(chan, 'path', 'channel', CHANNEL_PATHS),
        tap_floor=_number(chan, 'tap_floor', 'channel', minimum=0.0),
        pilot=pilot,
        pilot_noisy=bool(pil.get('noisy', True)),
        ldpc_seed=_number(code, 'seed', 'ldpc', int, 0),
        lifting=_number(code, 'lifting', 'ldpc', int, 2),
        max_iters=_number(code, 'max_iters', 'ldpc', int, 1),
        schedule=_choice(code, 'schedule', 'ldpc', (LAYERED, FLOODING)),
        seed=_number(exp, 'seed', 'experiment', int, 0),
        modem=_choice(exp, 'modem', 'experiment', MODEMS),
        acquisition=_choice(exp, 'acquisition', 'experiment', ACQUISITIONS),
        schemes=tuple(Scheme.parse(s) for s in schemes),
        symbol_energy=_number(exp, 'symbol_energy', 'experiment'),
        snr_db=_number(exp, 'snr_db', 'experiment'),
        snr_list=_float_list(exp, 'snr_list', 'experiment'),
        nu_max_list=_float_list(exp, 'nu_max_list', 'experiment', minimum=0.0),
        sweep_snr_nu_max=_number(exp, 'sweep_snr_nu_max', 'experiment', minimum=0.0),
        heatmap_nu_max=_float_list(exp, 'heatmap_nu_max', 'experiment', minimum=0.0),
        rpe_realizations=_number(exp, 'rpe_realizations', 'experiment', int, 1),
        low_rpe_threshold=_number(exp, 'low_rpe_threshold', 'experiment', minimum=0.0),
        trials=_number(exp, 'trials', 'experiment', int, 1),
        min_errors=_number(exp, 'min_errors', 'experiment', int, 0),
        batch_size=_number(exp, 'batch_size', 'experiment', int, 1),
        workers=_number(exp, 'workers', 'experiment', int, 1),
        output_dir=Path(str(raw['output'].get('directory') or 'results')),
        raw=raw,
    )
    if config.symbol_energy <= 0:
        raise ConfigError("experiment.symbol_energy: must be positive")

    try:
        config.pilot_config()
    except AcquisitionError as e:
        raise ConfigError(f"pilot: {e}")

    # every scheme, coded or not, takes its symbol counts from the code
    symbols = 6 * config.lifting
    if symbols > lattice.size:
        raise ConfigError(f"ldpc.lifting: {symbols} codeword symbols do not fit {lattice.size} bins")

    return config


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Load YAML, merge over defaults, apply environment and CLI overrides, validate.

    Precedence: CLI overrides > ZAKOTFS_* environment > file > defaults.
    """
    path = path or os.environ.get(ENV_CONFIG) or 'config.yaml'
    config_file = Path(path)
    if not config_file.exists():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        with open(config_file, 'r') as f:
            loaded = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"error loading configuration {path}: {e}")
    if not isinstance(loaded, dict):
        raise ConfigError(f"configuration {path} must be a mapping")

    raw = _merge(DEFAULTS, loaded)
    if os.environ.get(ENV_WORKERS):
        raw['experiment']['workers'] = os.environ[ENV_WORKERS]
    if os.environ.get(ENV_OUT):
        raw['output']['directory'] = os.environ[ENV_OUT]
    raw = _merge(raw, overrides or {})

    return validate(raw)
