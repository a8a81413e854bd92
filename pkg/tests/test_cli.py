import json

import pytest
from click.testing import CliRunner

from levysphere.cli import main
from levysphere.experiments import (
    EXIT_BLOW_UP,
    EXIT_CONFIG,
    EXIT_OK,
    blow_up_status,
    get_available_commands,
    get_experiment_function,
)

SMALL_MODEL = {'l_max': 7, 'n_lat': 12, 'n_lon': 22, 'dt': 0.01}


def _write_config(tmp_path, **extra):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({**SMALL_MODEL, **extra}))
    return str(path)


class TestRegistry:

    @pytest.mark.parametrize("command", ['simulate', 'pullback', 'attractor', 'ou-stats', 'verify', 'measure',
                                         'cocycle'])
    def test_every_command_has_a_runner(self, command):
        assert command in get_available_commands()
        assert callable(get_experiment_function(command))

    def test_unknown_command(self):
        assert get_experiment_function('nonsense') is None

    def test_blow_up_status(self):
        assert blow_up_status(0.5) is None
        assert blow_up_status(0.75)['code'] == EXIT_BLOW_UP


class TestCli:

    def test_default_config(self):
        result = CliRunner().invoke(main, ['default-config'])
        assert result.exit_code == 0
        assert json.loads(result.output)['beta'] == 1.5

    def test_invalid_config_exit_code(self, tmp_path):
        result = CliRunner().invoke(main, ['cocycle', '-c', _write_config(tmp_path, beta=2.5), '-q',
                                           '-o', str(tmp_path / 'out')])
        assert result.exit_code == EXIT_CONFIG
        assert 'beta' in result.output

    def test_unknown_field_hint(self, tmp_path):
        result = CliRunner().invoke(main, ['simulate', '-c', _write_config(tmp_path, viscosity=1.0), '-q'])
        assert result.exit_code == EXIT_CONFIG
        assert "Unknown config field 'viscosity'" in result.output

    def test_cocycle_run(self, tmp_path):
        config = _write_config(tmp_path, experiment={'cocycle': {'t': 0.1, 's': 0.1, 'n_pairs': 2}})
        out = tmp_path / 'out'
        result = CliRunner().invoke(main, ['cocycle', '-c', config, '-o', str(out), '--seed', '3', '-q'])
        assert result.exit_code == EXIT_OK, result.output
        report = json.loads((out / 'report.json').read_text())
        assert report['status']['code'] == EXIT_OK
        assert report['summary']['max_residual'] <= 1e-10
        manifest = json.loads((out / 'manifest.json').read_text())
        assert manifest['seeds']['base'] == 3
        assert manifest['config']['l_max'] == 7
        assert set(manifest['versions']) == {'levysphere', 'numpy', 'scipy', 'click', 'pyyaml', 'python'}
        assert (out / 'residuals.csv').exists()

    def test_simulate_run(self, tmp_path):
        config = _write_config(tmp_path, delta=5.0,
                               experiment={'simulate': {'t1': 0.2, 'record_every': 0.1}})
        out = tmp_path / 'sim'
        result = CliRunner().invoke(main, ['simulate', '-c', config, '-o', str(out), '-w', '2'])
        assert result.exit_code == EXIT_OK, result.output
        assert 'Output saved to' in result.output
        for name in ('ledger.csv', 'snapshots.csv', 'spectrum_final.csv'):
            assert (out / name).exists()
        ledger = (out / 'ledger.csv').read_text().splitlines()
        assert len(ledger) == 1 + 21
