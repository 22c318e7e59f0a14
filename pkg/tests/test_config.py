import numpy as np
import pytest
import yaml

from utils.helpers import (child_generators, config_hash, format_value, noise_psd, qam4_ber, trial_seed,
                           write_csv)
from zakotfs.config import ENV_CONFIG, ENV_OUT, ENV_WORKERS, ConfigError, Scheme, load_config


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in (ENV_CONFIG, ENV_OUT, ENV_WORKERS):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def write_config(tmp_path):
    def _write(content):
        path = tmp_path / 'config.yaml'
        path.write_text(yaml.safe_dump(content) if isinstance(content, dict) else content)
        return str(path)
    return _write


class TestLoadConfig:

    def test_defaults(self, write_config):
        config = load_config(write_config({}))
        assert (config.lattice.M, config.lattice.N) == (32, 48)
        assert config.filter.kind == 'sinc'
        assert config.oversampling == 16
        assert [s.name for s in config.schemes] == [
            'uncoded-standard', 'uncoded-rpe', 'coded-standard', 'coded-strip', 'coded-rpe']
        assert config.lifting == 251
        assert config.pilot_config().pilot_bin == (16, 24)
        assert config.needs_rpe
        assert config.low_rpe_threshold == 0.1

    def test_file_values_merge_over_defaults(self, write_config):
        config = load_config(write_config({'experiment': {'seed': 7, 'schemes': ['coded-strip']}}))
        assert config.seed == 7
        assert config.trials == 200
        assert not config.needs_rpe

    def test_empty_file(self, write_config):
        assert load_config(write_config('')).seed == 2024

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / 'absent.yaml'))

    def test_path_from_environment(self, write_config, monkeypatch):
        monkeypatch.setenv(ENV_CONFIG, write_config({'experiment': {'seed': 11}}))
        assert load_config().seed == 11

    def test_not_a_mapping(self, write_config):
        with pytest.raises(ConfigError):
            load_config(write_config('- 1\n- 2\n'))

    def test_environment_overrides(self, write_config, monkeypatch, tmp_path):
        monkeypatch.setenv(ENV_WORKERS, '2')
        monkeypatch.setenv(ENV_OUT, str(tmp_path / 'env-out'))
        config = load_config(write_config({'experiment': {'workers': 8}}))
        assert config.workers == 2
        assert config.output_dir == tmp_path / 'env-out'

    def test_cli_overrides_win(self, write_config, monkeypatch):
        monkeypatch.setenv(ENV_WORKERS, '2')
        config = load_config(write_config({}), overrides={'experiment': {'workers': 3}})
        assert config.workers == 3

    def test_veh_a_profile(self, write_config):
        profile = load_config(write_config({})).profile(4500.0)
        assert profile.nu_max == 4500.0
        assert profile.num_paths == 6


class TestValidation:

    @pytest.mark.parametrize('content', [
        {'experiment': {'modem': 'ofdm'}},
        {'experiment': {'acquisition': 'oracle'}},
        {'experiment': {'schemes': ['coded-diagonal']}},
        {'experiment': {'schemes': []}},
        {'experiment': {'trials': 0}},
        {'experiment': {'low_rpe_threshold': -0.5}},
        {'experiment': {'symbol_energy': 0.0}},
        {'experiment': {'snr_list': 'high'}},
        {'channel': {'path': 'optical'}},
        {'channel': {'delays_us': [0.0, 0.3], 'powers_db': [0.0]}},
        {'filter': {'kind': 'gaussian'}},
        {'filter': {'kind': 'rrc', 'beta_tau': 1.5}},
        {'lattice': {'duration': 0.00161}},
        {'pilot': {'k_p': 40}},
        {'ldpc': {'lifting': 300}},
        {'ldpc': {'schedule': 'random'}},
    ])
    def test_invalid(self, write_config, content):
        with pytest.raises(ConfigError):
            load_config(write_config(content))

    def test_scheme_parse(self):
        scheme = Scheme.parse('Coded-RPE')
        assert scheme.coded and scheme.allocation == 'rpe'
        assert scheme.name == 'coded-rpe'
        assert not Scheme.parse('uncoded-strip').coded
        with pytest.raises(ConfigError):
            Scheme.parse('coded')


class TestDigest:

    def test_stable(self, write_config):
        path = write_config({'experiment': {'seed': 5}})
        assert load_config(path).digest == load_config(path).digest

    def test_ignores_workers_output_and_logging(self, write_config, tmp_path):
        a = load_config(write_config({'experiment': {'workers': 1}}))
        b = load_config(write_config({'experiment': {'workers': 6},
                                      'output': {'directory': str(tmp_path / 'x')},
                                      'logging': {'level': 'DEBUG'}}))
        assert a.digest == b.digest

    def test_tracks_result_settings(self, write_config):
        a = load_config(write_config({'experiment': {'seed': 1}}))
        b = load_config(write_config({'experiment': {'seed': 2}}))
        assert a.digest != b.digest


class TestHelpers:

    def test_config_hash_ignores_key_order(self):
        assert config_hash({'a': 1, 'b': {'c': 2, 'd': 3}}) == config_hash({'b': {'d': 3, 'c': 2}, 'a': 1})
        assert config_hash({'a': 1}) != config_hash({'a': 2})

    def test_format_value(self):
        assert format_value(3) == '3'
        assert format_value(np.int64(4)) == '4'
        assert format_value(0.000123456789) == '1.234568e-04'
        assert format_value(float('nan')) == 'nan'
        assert format_value(True) == 'true'
        assert format_value('coded-rpe') == 'coded-rpe'

    def test_write_csv(self, tmp_path):
        path = write_csv(tmp_path / 'sub' / 'out.csv', ('a', 'b'), [(1, 0.5), (2, 0.25)], 'deadbeef')
        assert path.read_text().splitlines() == [
            '# config_hash=deadbeef', 'a,b', '1,5.000000e-01', '2,2.500000e-01']

    def test_write_csv_without_digest(self, tmp_path):
        path = write_csv(tmp_path / 'out.csv', ('a',), [(1,)])
        assert path.read_text().splitlines() == ['a', '1']

    def test_trial_seed_deterministic(self):
        a = child_generators(trial_seed(2024, 0, 1, 2), 4)
        b = child_generators(trial_seed(2024, 0, 1, 2), 4)
        for x, y in zip(a, b):
            assert x.integers(1 << 30) == y.integers(1 << 30)

    def test_trial_seed_streams_differ(self):
        base = trial_seed(2024, 0, 1, 2)
        draws = {child_generators(trial_seed(2024, 0, 1, t), 1)[0].integers(1 << 62) for t in range(20)}
        assert len(draws) == 20
        children = [g.integers(1 << 62) for g in child_generators(base, 4)]
        assert len(set(children)) == 4

    def test_noise_psd(self):
        assert noise_psd(10.0) == pytest.approx(0.1)
        assert noise_psd(0.0, symbol_energy=2.0) == pytest.approx(2.0)

    def test_qam4_ber(self):
        assert float(qam4_ber(0.0)) == pytest.approx(0.158655, rel=1e-5)
