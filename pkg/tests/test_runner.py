#!/usr/bin/env python3
"""
Tests for the ExperimentRunner.
"""
import json
import unittest
import sys
from pathlib import Path
from unittest.mock import patch
import tempfile

import numpy as np

# Add the parent directory to the path so we can import the package
sys.path.insert(0, str(Path(__file__).parent.parent))

from fluctchain.models import ChainSpec, build_hopping_matrix
from fluctchain.runner import ExperimentError, ExperimentRunner
from fluctchain.single_particle import matrix_exponential_check, wave_packet
from fluctchain.utils.config_loader import RunConfig
from fluctchain.utils.result_writer import RunRecord, file_checksum, read_csv


def small_config(experiment: str, **overrides) -> RunConfig:
    """A fast configuration for the given experiment."""
    values = {
        'experiment': experiment,
        'simulation.dt': 0.05,
        'simulation.t_max': 1.0,
        'simulation.t_samples': 5,
        'simulation.workers': 1,
    }
    values.update(overrides)
    return RunConfig().with_overrides(values)


class RunnerTestCase(unittest.TestCase):
    """Temporary output directory per test."""

    def setUp(self):
        """Set up a temporary output directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)

    def tearDown(self):
        """Clean up the output directory."""
        self.tmp.cleanup()

    def run_config(self, config: RunConfig, subdir: str = 'run') -> RunRecord:
        return ExperimentRunner(config, output_dir=self.out / subdir).run()


class TestTimeGrid(unittest.TestCase):
    """Test cases for the output time grid."""

    def test_grid_snaps_to_timestep(self):
        """Test t_samples points rounded to multiples of dt."""
        config = RunConfig().with_overrides({'simulation.dt': 0.1, 'simulation.t_max': 1.0,
                                             'simulation.t_samples': 5})
        np.testing.assert_allclose(ExperimentRunner(config, output_dir='unused').time_grid(),
                                   [0.0, 0.2, 0.5, 0.8, 1.0])

    def test_duplicate_points_removed(self):
        """Test more samples than timesteps collapses to the step grid."""
        config = RunConfig().with_overrides({'simulation.dt': 0.1, 'simulation.t_max': 1.0,
                                             'simulation.t_samples': 101})
        grid = ExperimentRunner(config, output_dir='unused').time_grid()
        self.assertEqual(grid.size, 11)
        self.assertTrue(np.all(np.diff(grid) > 0))


class TestEnsembleExperiment(RunnerTestCase):
    """Test cases for trajectory ensembles."""

    def config(self):
        return small_config('ensemble', **{'chain.n': 12, 'noise.gammas': [0.1, 0.5],
                                           'simulation.trajectories': 20, 'simulation.source': 6})

    def test_outputs_and_record(self):
        """Test heatmaps, series and run_record.json per gamma."""
        record = self.run_config(self.config())
        run_dir = self.out / 'run'
        self.assertEqual(record.experiment, 'ensemble')
        self.assertEqual(len(record.checksums), 10)
        for name in ('ensemble_g0.1_single.pgm', 'ensemble_g0.5_mean.txt', 'ensemble_g0.5_series.csv'):
            self.assertIn(name, record.checksums)
            self.assertEqual(record.checksums[name], file_checksum(run_dir / name))

        series = read_csv(run_dir / 'ensemble_g0.1_series.csv')
        self.assertEqual(list(series)[:2], ['t', 'msd'])
        self.assertIn('msd_f', series)
        self.assertEqual(series['msd'][0], 0.0)
        self.assertAlmostEqual(series['momentum'][0], 0.0, places=12)

        mean = np.loadtxt(run_dir / 'ensemble_g0.1_mean.txt')
        self.assertEqual(mean.shape, (5, 12))
        self.assertAlmostEqual(mean[0, 6], 1.0)

        saved = RunRecord.from_json((run_dir / 'run_record.json').read_text())
        self.assertEqual(saved.seed, 42)
        self.assertEqual(saved.config['noise']['gammas'], [0.1, 0.5])

    def test_reproducible_checksums(self):
        """Test identical configuration and seed give identical files."""
        first = self.run_config(self.config(), 'a')
        second = self.run_config(self.config(), 'b')
        self.assertEqual(first.checksums, second.checksums)

    def test_single_realisation_front_shrinks_with_gamma(self):
        """Test the t=20 front of the single-realisation field does not grow with gamma."""
        gammas = [0.05, 0.1, 0.2, 0.5]
        config = small_config('ensemble', **{
            'chain.n': 50, 'noise.gammas': gammas, 'simulation.source': 0, 'simulation.seed': 42,
            'simulation.dt': 0.01, 'simulation.t_max': 20.0, 'simulation.trajectories': 2,
        })
        self.run_config(config)
        fronts = [read_csv(self.out / 'run' / f"ensemble_g{g:g}_series.csv")['front_radius_single'][-1]
                  for g in gammas]
        self.assertTrue(np.all(np.diff(fronts) <= 0), fronts)
        self.assertGreater(fronts[0], fronts[-1])

    def test_wave_packet_origin_is_clipped(self):
        """Test a packet requested at the last site starts at n-2 and its MSD is measured there."""
        n = 8
        config = small_config('ensemble', **{
            'chain.n': n, 'noise.gamma': 0.0, 'simulation.source': n - 1,
            'simulation.initial_state': 'wave_packet', 'simulation.trajectories': 2,
        })
        self.run_config(config)
        series = read_csv(self.out / 'run' / 'ensemble_g0_series.csv')

        psi0 = wave_packet(n, n - 2)
        R = build_hopping_matrix(ChainSpec(n=n))
        dist2 = (np.arange(n) - (n - 2.0)) ** 2
        expected = [np.abs(matrix_exponential_check(R, t) @ psi0) ** 2 @ dist2 for t in series['t']]
        self.assertAlmostEqual(series['msd'][0], 0.5)
        np.testing.assert_allclose(series['msd'], expected, atol=1e-8)


class TestExactExperiment(RunnerTestCase):
    """Test cases for the closed-form and density experiment."""

    def test_series_follow_closed_forms(self):
        """Test momentum equals exp(-2 gamma t) away from the edges."""
        config = small_config('exact', **{'chain.n': 31, 'noise.gamma': 0.2})
        record = self.run_config(config)
        self.assertEqual(len(record.checksums), 5)
        series = read_csv(self.out / 'run' / 'exact_g0.2_series.csv')
        np.testing.assert_allclose(series['momentum'], series['momentum_exp_2gamma'], atol=1e-5)
        self.assertTrue(np.all(series['msd'] <= series['msd_f'] + 1e-6))

    def test_infinite_chain_writes_correlation_only(self):
        """Test the analytic infinite chain skips density evolution."""
        config = small_config('exact', **{'chain.n': 21, 'chain.boundary': 'infinite-analytic'})
        record = self.run_config(config)
        self.assertEqual(sorted(record.checksums), ['exact_g0.1_correlation.pgm', 'exact_g0.1_correlation.txt'])


class TestLindbladExperiment(RunnerTestCase):
    """Test cases for the many-body experiment."""

    def test_state_and_commutator_series(self):
        """Test magnetisation columns, trace distance and the bound column."""
        config = small_config('lindblad', **{'chain.n': 3, 'noise.gamma': 0.5, 'lindblad.samples': 2})
        record = self.run_config(config)
        self.assertEqual(len(record.checksums), 2)

        state = read_csv(self.out / 'run' / 'lindblad_g0.5_state.csv')
        np.testing.assert_allclose([state['sz_0'][0], state['sz_1'][0], state['sz_2'][0]], [1.0, -1.0, -1.0])
        self.assertTrue(np.all(np.diff(state['trace_distance_mixed']) <= 1e-9))

        commutator = read_csv(self.out / 'run' / 'lindblad_g0.5_commutator.csv')
        self.assertEqual(commutator['t'].size, 5)
        self.assertAlmostEqual(commutator['commutator'][0], 0.0)
        self.assertGreater(commutator['commutator'][-1], 0.0)
        self.assertTrue(np.all(np.isfinite(commutator['lr_bound'])))
        self.assertTrue(np.all(commutator['lr_bound'] >= 0.0))


class TestBoundsExperiment(RunnerTestCase):
    """Test cases for bound curves and regime reports."""

    def test_curves_and_regime(self):
        """Test one CSV per gamma and no regime report at gamma = 0."""
        config = small_config('bounds', **{'chain.n': 4, 'noise.gammas': [0.0, 1.0]})
        record = self.run_config(config)
        self.assertEqual(sorted(record.checksums),
                         ['bounds_g0.csv', 'bounds_g1.csv', 'bounds_g1_regime.json'])

        curves = read_csv(self.out / 'run' / 'bounds_g1.csv')
        self.assertEqual(list(curves), ['t', 'msd_f', 'variance_bound', 'chebyshev_radius', 'lr_envelope'])
        np.testing.assert_allclose(read_csv(self.out / 'run' / 'bounds_g0.csv')['msd_f'], 2.0 * curves['t'] ** 2)

        regime = json.loads((self.out / 'run' / 'bounds_g1_regime.json').read_text())
        self.assertIn('regime', regime)
        self.assertAlmostEqual(regime['kappa_eps'], regime['envelope_radius'] / 1.0)

    def test_large_chain_needs_norm(self):
        """Test bounds on a long chain without bounds.h0_norm."""
        config = small_config('bounds', **{'chain.n': 40})
        with self.assertRaises(ExperimentError) as ctx:
            self.run_config(config)
        self.assertEqual(ctx.exception.experiment, 'bounds')
        self.assertIn('h0_norm', str(ctx.exception))

        record = self.run_config(small_config('bounds', **{'chain.n': 40, 'bounds.h0_norm': 10.0}), 'ok')
        self.assertEqual(len(record.checksums), 2)


class TestAnalysisExperiment(RunnerTestCase):
    """Test cases for exponent and momentum fits."""

    def test_dynamic_report(self):
        """Test report fields and the two-gamma momentum note."""
        config = small_config('analyze', **{
            'chain.n': 31, 'noise.gamma': 0.5, 'simulation.dt': 0.01, 'simulation.t_max': 4.0,
            'simulation.t_samples': 41, 'analysis.fit_t_min': 0.5, 'analysis.fit_t_max': 4.0,
        })
        record = self.run_config(config)
        report = json.loads((self.out / 'run' / 'analysis_report.json').read_text())
        self.assertEqual(report['window'], [0.5, 4.0])
        self.assertIn('alpha', report['msd_fit'])
        self.assertIn('alpha', report['front_fit'])
        self.assertLess(abs(report['momentum_rate_over_gamma'] - 2.0), 0.1)
        self.assertEqual(len(record.notes), 1)
        self.assertIn('2 gamma', record.notes[0])


class TestMixingExperiment(RunnerTestCase):
    """Test cases for the mixing verdict."""

    def verdict(self, h0: str, gamma: float = 0.5) -> dict:
        config = small_config('mixing', **{'chain.n': 2, 'lindblad.h0': h0,
                                           'lindblad.kind': 'z-only', 'noise.gamma': gamma})
        record = self.run_config(config, h0)
        self.assertIn('mixing_F.txt', record.checksums)
        return json.loads((self.out / h0 / 'mixing_verdict.json').read_text())

    def test_field_chain_mixes(self):
        """Test the transverse-field chain relaxes to the maximally mixed state."""
        verdict = self.verdict('xx_field')
        self.assertTrue(verdict['maximally_mixing'])
        self.assertTrue(verdict['reached_mixed_state'])

    def test_xx_chain_keeps_magnetisation(self):
        """Test z-noise on the XX chain conserves total magnetisation."""
        verdict = self.verdict('xx')
        self.assertFalse(verdict['maximally_mixing'])
        self.assertFalse(verdict['reached_mixed_state'])

    def test_unitary_chain_has_no_decay(self):
        """Test gamma = 0 reports a zero gap and keeps the configured horizon."""
        verdict = self.verdict('xx_field', gamma=0.0)
        relaxation = json.loads((self.out / 'xx_field' / 'mixing_relaxation.json').read_text())
        self.assertEqual(relaxation['gap'], 0.0)
        self.assertFalse(verdict['maximally_mixing'])
        self.assertEqual(verdict['horizon'], 1.0)


class TestErrorWrapping(RunnerTestCase):
    """Test cases for failure reporting."""

    @patch('fluctchain.runner.run_ensemble')
    def test_engine_failure_is_wrapped(self, mock_run):
        """Test a module exception surfaces as ExperimentError."""
        mock_run.side_effect = RuntimeError('boom')
        with self.assertRaises(ExperimentError) as ctx:
            self.run_config(small_config('ensemble', **{'chain.n': 8}))
        self.assertEqual(ctx.exception.experiment, 'ensemble')
        self.assertIn('boom', str(ctx.exception))
        self.assertFalse((self.out / 'run' / 'run_record.json').exists())


if __name__ == '__main__':
    unittest.main()
