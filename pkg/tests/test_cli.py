"""
Integration tests for the flocstab command-line interface
"""

import json

import pandas as pd
import pytest

from flocstab.cli import EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK, RunConfig, main
from flocstab.validation import ConfigError

AGGREGATING = {'g': 1.0, 'mu': 1.0, 'q': 1.8, 'kf': 0.0, 'ka': 1.0}


def _read(path):
    return json.loads(path.read_text(encoding='utf-8'))


class TestRunConfig:
    """Test the configuration document"""

    def test_defaults_are_merged_under_document(self):
        cfg = RunConfig.from_dict({'preset': 'example1', 'params': {'b': 0.3}, 'solver': {'damping': 0.7}},
                                  defaults={'grid': 64, 'solver': {'tol': 1e-9}})
        assert cfg.grid == 64
        assert cfg.solver == {'tol': 1e-9, 'damping': 0.7}

    def test_sweep_range_expands(self):
        cfg = RunConfig.from_dict({'preset': 'example1', 'sweep': {'b': {'start': 0.0, 'stop': 1.0, 'num': 5}}})
        assert cfg.sweep['b'] == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
        assert cfg.sweep['fixed'] == {}

    @pytest.mark.parametrize("document, message", [
        ({'params': {}}, "preset"),
        ({'preset': 'example9'}, "unknown preset"),
        ({'preset': 'example1', 'colour': 'red'}, "unknown config keys"),
        ({'preset': 'example1', 'schema_version': 2}, "schema_version"),
        ({'preset': 'example1', 'grid': 4}, "grid"),
        ({'preset': 'example1', 'solver': {'omega': 1.0}}, "solver"),
        ({'preset': 'custom'}, "rates"),
        ({'preset': 'example1', 'simulation': {'initial': 'random'}}, "initial"),
    ])
    def test_rejects_bad_documents(self, document, message):
        with pytest.raises(ConfigError, match=message):
            RunConfig.from_dict(document)

    def test_rejects_invalid_json(self):
        with pytest.raises(ConfigError, match="JSON"):
            RunConfig.from_json('{"preset": ')

    def test_to_json_reloads(self):
        cfg = RunConfig.from_dict({'preset': 'example2', 'params': {'a': 1.0, 'b': 0.1, 'c': 0.1}})
        assert RunConfig.from_json(cfg.to_json()).params == cfg.params


@pytest.mark.integration
class TestCommands:
    """Run each command end to end"""

    def test_check_zero(self, write_config, tmp_path):
        path = write_config({'preset': 'example1', 'params': {'b': 2.0}, 'grid': 64, 'export': ['spectrum']})
        assert main(['check-zero', '--config', str(path), '--out', str(tmp_path / 'out')]) == EXIT_OK
        result = _read(tmp_path / 'out' / 'check_zero.json')
        assert result['report']['verdict'] == 'unstable'
        assert result['assumptions']['checks']['A1']['passed'] is True
        spectrum = pd.read_csv(tmp_path / 'out' / 'zero_spectrum.csv')
        assert list(spectrum.columns) == ['re', 'im']
        assert len(spectrum) == 65

    def test_steady_then_check_steady(self, write_config, tmp_path):
        out = tmp_path / 'out'
        path = write_config({'preset': 'custom', 'rates': AGGREGATING, 'grid': 32,
                             'solver': {'tol': 1e-10, 'max_iter': 20000}})
        assert main(['steady', '--config', str(path), '--out', str(out)]) == EXIT_OK
        steady = pd.read_csv(out / 'steady.csv')
        assert list(steady.columns) == ['node', 'x', 'f_star', 'p_star']
        assert (steady['p_star'] > 0.0).all()
        assert _read(out / 'steady.json')['distinct_fixed_points'] >= 1

        code = main(['check-steady', '--config', str(path), '--out', str(out),
                     '--pstar', str(out / 'steady.csv')])
        assert code == EXIT_OK
        report = _read(out / 'check_steady.json')['report']
        assert report['positivity']['cond2_holds'] is False
        assert report['verdict'] in ('unstable', 'inconclusive')

    def test_check_steady_from_csv_matches_direct_solve(self, write_config, tmp_path):
        path = write_config({'preset': 'custom', 'rates': AGGREGATING, 'grid': 32,
                             'solver': {'tol': 1e-10, 'max_iter': 20000}})
        assert main(['steady', '--config', str(path), '--out', str(tmp_path / 'steady')]) == EXIT_OK
        assert main(['check-steady', '--config', str(path), '--out', str(tmp_path / 'loaded'),
                     '--pstar', str(tmp_path / 'steady' / 'steady.csv')]) == EXIT_OK
        assert main(['check-steady', '--config', str(path), '--out', str(tmp_path / 'direct')]) == EXIT_OK
        loaded = _read(tmp_path / 'loaded' / 'check_steady.json')['report']
        direct = _read(tmp_path / 'direct' / 'check_steady.json')['report']
        assert loaded.keys() == direct.keys()
        for key, value in direct.items():
            if isinstance(value, float):
                assert loaded[key] == pytest.approx(value, rel=1e-12, abs=1e-12), key
            else:
                assert loaded[key] == value, key

    def test_stdout_is_only_json(self, write_config, tmp_path, capsys):
        path = write_config({'preset': 'example1', 'params': {'b': 2.0}, 'grid': 32})
        assert main(['check-zero', '--config', str(path), '--out', str(tmp_path),
                     '--log-level', 'INFO']) == EXIT_OK
        captured = capsys.readouterr()
        assert json.loads(captured.out) == _read(tmp_path / 'check_zero.json')
        assert 'Zero solution' in captured.err

    def test_pstar_on_wrong_grid(self, write_config, tmp_path):
        out = tmp_path / 'out'
        path = write_config({'preset': 'custom', 'rates': AGGREGATING, 'grid': 32,
                             'solver': {'tol': 1e-10, 'max_iter': 20000}})
        assert main(['steady', '--config', str(path), '--out', str(out)]) == EXIT_OK
        code = main(['check-steady', '--config', str(path), '--out', str(out), '--grid', '64',
                     '--pstar', str(out / 'steady.csv')])
        assert code == EXIT_CONFIG

    def test_trivial_steady_state_exits_2(self, write_config, tmp_path):
        path = write_config({'preset': 'example2', 'params': {'a': 1.0, 'b': 0.05, 'c': 0.05}, 'grid': 32})
        assert main(['steady', '--config', str(path), '--out', str(tmp_path)]) == EXIT_NOT_CONVERGED
        assert (tmp_path / 'steady.csv').exists()

    def test_simulate(self, write_config, tmp_path):
        path = write_config({'preset': 'example1', 'params': {'b': 0.3}, 'grid': 32,
                             'simulation': {'t_end': 0.5, 'record_every': 5}})
        assert main(['simulate', '--config', str(path), '--out', str(tmp_path)]) == EXIT_OK
        trajectory = pd.read_csv(tmp_path / 'trajectory.csv')
        assert list(trajectory.columns) == ['t', 'node', 'x', 'p']
        assert trajectory['t'].max() == pytest.approx(0.5)
        summary = _read(tmp_path / 'simulate.json')
        assert summary['blew_up'] is False
        assert (tmp_path / 'diagnostics.csv').exists()

    def test_sweep(self, write_config, tmp_path):
        path = write_config({'preset': 'example1', 'params': {'kf_slope': 0.0}, 'grid': 32,
                             'sweep': {'b': [0.1, 0.3, 2.0]}})
        assert main(['sweep', '--config', str(path), '--out', str(tmp_path)]) == EXIT_OK
        frame = pd.read_csv(tmp_path / 'sweep.csv')
        assert list(frame['verdict']) == ['stable', 'stable', 'unstable']
        assert (tmp_path / 'sweep.svg').read_text(encoding='utf-8').lstrip().startswith('<?xml')
        assert _read(tmp_path / 'sweep.json')['feasible_count'] == 2


class TestExitCodes:
    """Configuration problems exit with code 3"""

    def test_missing_config_file(self, tmp_path):
        assert main(['check-zero', '--config', str(tmp_path / 'absent.json')]) == EXIT_CONFIG

    def test_invalid_preset_parameters(self, write_config, tmp_path):
        path = write_config({'preset': 'example1', 'params': {'b': -1.0}})
        assert main(['check-zero', '--config', str(path), '--out', str(tmp_path)]) == EXIT_CONFIG

    def test_bad_log_level(self, write_config, tmp_path):
        path = write_config({'preset': 'example1', 'params': {'b': 0.3}})
        assert main(['check-zero', '--config', str(path), '--log-level', 'LOUD']) == EXIT_CONFIG

    def test_grid_override_too_small(self, write_config, tmp_path):
        path = write_config({'preset': 'example1', 'params': {'b': 0.3}})
        assert main(['check-zero', '--config', str(path), '--grid', '3']) == EXIT_CONFIG

    def test_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(['check-zero'])
        assert excinfo.value.code == EXIT_CONFIG

    def test_sweep_without_section(self, write_config, tmp_path):
        path = write_config({'preset': 'example1', 'params': {'b': 0.3}, 'grid': 32})
        assert main(['sweep', '--config', str(path), '--out', str(tmp_path)]) == EXIT_CONFIG
