"""
Test suite for the incentive_lab command line: outputs and exit statuses
"""
import pandas as pd
import pytest

from incentive_lab import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, run

QUICK = ['--profile', 'quick', '--horizon', '1']


class TestCommands:
    def test_incentives(self, tmp_path):
        """Incentive tables, schedule and effective config"""
        assert run(['incentives', '--out', str(tmp_path), *QUICK]) == EXIT_OK
        table = pd.read_csv(tmp_path / 'incentives.csv')
        assert len(table) == 10
        assert (table['incentive'] > 0).all()
        schedule = pd.read_csv(tmp_path / 'schedule.csv')
        assert list(schedule.columns) == ['t', 'x', 'z']
        assert (tmp_path / 'incentives_bid.csv').exists()
        assert (tmp_path / 'effective_config').exists()

    def test_value(self, tmp_path):
        """Value field and oracle artifacts"""
        status = run(['value', '--out', str(tmp_path), '--mc-paths', '256', *QUICK])
        assert status == EXIT_OK
        for name in ('value_field.csv', 'stationary_value.csv', 'horizon_convergence.csv', 'oracle_checks.csv'):
            assert (tmp_path / name).exists()
        field = pd.read_csv(tmp_path / 'value_field.csv')
        assert list(field.columns) == ['t', 'x', 'p']

    def test_simulate(self, tmp_path):
        """Shape and objective artifacts"""
        status = run(['simulate', '--out', str(tmp_path), '--paths', '4', *QUICK])
        assert status == EXIT_OK
        assert (tmp_path / 'shape_with.csv').exists()
        assert (tmp_path / 'objective.csv').exists()

    def test_sweep_needs_scenarios(self, tmp_path):
        """sweep without scenarios is a configuration error"""
        assert run(['sweep', '--out', str(tmp_path), *QUICK]) == EXIT_CONFIG

    def test_effective_config_is_reproducible(self, tmp_path):
        """Same seed, same config and tables"""
        run(['incentives', '--out', str(tmp_path / 'a'), '--seed', '42', *QUICK])
        run(['incentives', '--out', str(tmp_path / 'b'), '--seed', '42', *QUICK])
        first = (tmp_path / 'a' / 'effective_config').read_text()
        assert first == (tmp_path / 'b' / 'effective_config').read_text()
        assert 'seed = 42' in first
        assert (tmp_path / 'a' / 'incentives.csv').read_bytes() == (tmp_path / 'b' / 'incentives.csv').read_bytes()


class TestExitStatus:
    def test_missing_parameter_file(self, tmp_path):
        """Exit 2 for an absent --config file"""
        status = run(['incentives', '--out', str(tmp_path), '--config', str(tmp_path / 'absent.cfg'), *QUICK])
        assert status == EXIT_CONFIG

    def test_invalid_parameter(self, tmp_path):
        """Exit 2 for an out-of-range parameter"""
        path = tmp_path / 'params.cfg'
        path.write_text("[book]\nalpha_a = 0.5\n")
        assert run(['incentives', '--out', str(tmp_path / 'out'), '--config', str(path), *QUICK]) == EXIT_CONFIG

    def test_seed_out_of_range(self, tmp_path):
        """Exit 2 for a seed beyond 64 bits"""
        assert run(['incentives', '--out', str(tmp_path), '--seed', str(2 ** 64), *QUICK]) == EXIT_CONFIG

    def test_grid_mismatch(self, tmp_path):
        """Exit 3 when dx does not divide L"""
        assert run(['value', '--out', str(tmp_path), '--dx', '0.003', *QUICK]) == EXIT_NUMERIC

    def test_noise_stability(self, tmp_path):
        """Exit 3 when sigma² dt is too large"""
        assert run(['simulate', '--out', str(tmp_path), '--profile', 'quick', '--horizon', '2', '--dt', '2']) == EXIT_NUMERIC

    def test_output_is_a_file(self, tmp_path):
        """Exit 5 when the output path is a file"""
        blocker = tmp_path / 'blocker'
        blocker.write_text('x')
        assert run(['incentives', '--out', str(blocker), *QUICK]) == EXIT_IO

    def test_unknown_format(self, tmp_path):
        """argparse rejects unknown formats"""
        with pytest.raises(SystemExit):
            run(['incentives', '--out', str(tmp_path), '--format', 'pdf'])
