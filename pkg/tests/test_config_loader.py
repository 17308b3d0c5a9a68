#!/usr/bin/env python3
"""
Tests for the ConfigLoader class and RunConfig validation.
"""
import unittest
import sys
from pathlib import Path
from unittest.mock import patch
import tempfile
import json

# Add the parent directory to the path so we can import the package
sys.path.insert(0, str(Path(__file__).parent.parent))

from fluctchain.utils.config_loader import (
    OUTPUT_DIR_ENV,
    WORKERS_ENV,
    ConfigError,
    ConfigLoader,
    RunConfig,
)


class TestConfigLoader(unittest.TestCase):
    """Test cases for ConfigLoader class."""

    def test_load_yaml_file(self):
        """Test loading YAML configuration file."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.yaml', delete=False) as f:
            f.write("""
experiment: exact
chain:
  n: 201
noise:
  gamma: 0.05
""")
            config_path = f.name

        try:
            data = ConfigLoader.load_file(config_path)
            self.assertEqual(data['chain']['n'], 201)
            config = ConfigLoader.load_config(config_path)
            self.assertEqual(config.experiment, 'exact')
            self.assertEqual(config.noise.gamma, 0.05)
            self.assertEqual(config.simulation.dt, 0.01)
        finally:
            Path(config_path).unlink()

    def test_load_json_file(self):
        """Test loading JSON configuration file."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.json', delete=False) as f:
            json.dump({'experiment': 'bounds', 'noise': {'gammas': [1, 2]}}, f)
            config_path = f.name

        try:
            config = ConfigLoader.load_config(config_path)
            self.assertEqual(config.gammas, [1.0, 2.0])
        finally:
            Path(config_path).unlink()

    def test_content_sniffing_without_suffix(self):
        """Test that files without a known suffix are parsed as JSON, then YAML."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.cfg', delete=False) as f:
            f.write("chain:\n  n: 12\n")
            config_path = f.name

        try:
            self.assertEqual(ConfigLoader.load_config(config_path).chain.n, 12)
        finally:
            Path(config_path).unlink()

    def test_load_file_not_found(self):
        """Test loading non-existent file."""
        with self.assertRaises(FileNotFoundError):
            ConfigLoader.load_file('/nonexistent/path/to/file.yaml')

    def test_serialise_round_trip(self):
        """Test parse_config(serialise(config)) == config for both formats."""
        config = RunConfig(experiment='analyze')
        config = config.with_overrides({'noise.gammas': [0.1, 0.3], 'analysis.origin': 7})
        for fmt in ('yaml', 'json'):
            self.assertEqual(ConfigLoader.parse_config(ConfigLoader.serialise(config, fmt)), config)

    def test_save_and_load_config(self):
        """Test save_config followed by load_config."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'run.json'
            config = RunConfig().with_overrides({'experiment': 'mixing', 'chain.n': 3, 'lindblad.h0': 'xx_field'})
            ConfigLoader.save_config(config, path, format='json')
            self.assertEqual(ConfigLoader.load_config(path), config)

    def test_create_sample_config(self):
        """Test creating sample configuration."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.yaml', delete=False) as f:
            config_path = f.name

        try:
            ConfigLoader.create_sample_config(config_path)
            config = ConfigLoader.load_config(config_path)
            self.assertEqual(config.experiment, 'ensemble')
            self.assertEqual(config.gammas, [0.05, 0.1, 0.2, 0.5])
            self.assertEqual(config.chain.n, 50)
            self.assertEqual(config.simulation.trajectories, 2000)
        finally:
            Path(config_path).unlink()

    def test_invalid_text(self):
        """Test a document that is neither JSON nor YAML."""
        with self.assertRaises(ConfigError):
            ConfigLoader.parse_config("chain: [unclosed")


class TestRunConfigValidation(unittest.TestCase):
    """Test cases for strict parsing and range checks."""

    def test_negative_gamma_names_key(self):
        """Test the error message names noise.gamma and the offending value."""
        with self.assertRaises(ConfigError) as ctx:
            ConfigLoader.parse_config("noise:\n  gamma: -1.0\n")
        self.assertEqual(ctx.exception.key, 'noise.gamma')
        self.assertIn('-1.0', str(ctx.exception))

    def test_lindblad_size_limit(self):
        """Test the many-body engine size limit."""
        with self.assertRaises(ConfigError) as ctx:
            ConfigLoader.parse_config("experiment: lindblad\nchain:\n  n: 8\n")
        self.assertEqual(ctx.exception.key, 'chain.n')
        with self.assertRaises(ConfigError):
            ConfigLoader.parse_config("experiment: mixing\nchain:\n  n: 6\n")

    def test_unknown_keys_and_sections(self):
        """Test strict rejection of unknown entries."""
        with self.assertRaises(ConfigError) as ctx:
            ConfigLoader.parse_config("chain:\n  sites: 10\n")
        self.assertEqual(ctx.exception.key, 'chain.sites')
        with self.assertRaises(ConfigError):
            ConfigLoader.parse_config("plotting:\n  dpi: 300\n")
        with self.assertRaises(ConfigError):
            ConfigLoader.parse_config("experiment: sweep\n")

    def test_type_coercion(self):
        """Test integer-valued floats, rejected booleans and strings."""
        config = ConfigLoader.parse_config('{"chain": {"n": 20.0}, "noise": {"gamma": 1}}')
        self.assertEqual(config.chain.n, 20)
        self.assertIsInstance(config.noise.gamma, float)
        with self.assertRaises(ConfigError):
            ConfigLoader.parse_config("chain:\n  n: true\n")
        with self.assertRaises(ConfigError):
            ConfigLoader.parse_config("noise:\n  gamma: fast\n")
        with self.assertRaises(ConfigError):
            ConfigLoader.parse_config("chain:\n  n: 2.5\n")

    def test_range_checks(self):
        """Test a sample of range violations."""
        cases = {
            'simulation.trajectories': 0,
            'simulation.dt': 0.0,
            'simulation.t_samples': 1,
            'simulation.source': 50,
            'bounds.eps': 1.5,
            'bounds.delta': 0.0,
            'chain.boundary': 'torus',
            'noise.mode': 'telegraph',
            'lindblad.kind': 'x-only',
        }
        for key, value in cases.items():
            with self.assertRaises(ConfigError, msg=key) as ctx:
                RunConfig().with_overrides({key: value})
            self.assertEqual(ctx.exception.key, key)

    def test_fit_window_order(self):
        """Test fit_t_min < fit_t_max."""
        with self.assertRaises(ConfigError):
            RunConfig().with_overrides({'analysis.fit_t_min': 10.0, 'analysis.fit_t_max': 5.0})

    def test_initial_spins_length(self):
        """Test spin strings must cover every site."""
        with self.assertRaises(ConfigError):
            RunConfig().with_overrides({'experiment': 'lindblad', 'chain.n': 3, 'lindblad.initial_spins': 'ud'})

    def test_overrides_skip_none(self):
        """Test that unset overrides leave values alone."""
        config = RunConfig().with_overrides({'noise.gamma': None, 'chain.n': 30})
        self.assertEqual(config.noise.gamma, 0.1)
        self.assertEqual(config.chain.n, 30)
        with self.assertRaises(ConfigError):
            RunConfig().with_overrides({'gamma': 0.2})

    def test_chain_spec(self):
        """Test the ChainSpec built from a configuration."""
        config = RunConfig().with_overrides({'chain.boundary': 'ring', 'noise.mode': 'static'})
        spec = config.chain_spec(0.4)
        self.assertEqual(spec.boundary, 'ring')
        self.assertEqual(spec.gamma, 0.4)
        self.assertEqual(spec.noise_mode, 'static')
        self.assertEqual(config.chain_spec().gamma, 0.1)


class TestEnvironment(unittest.TestCase):
    """Test cases for environment fallbacks."""

    def test_output_dir_from_environment(self):
        """Test FLUCT_CHAIN_OUTPUT_DIR when the file leaves it unset."""
        with patch.dict('os.environ', {OUTPUT_DIR_ENV: '/tmp/fluct-out'}):
            self.assertEqual(RunConfig().output_dir, Path('/tmp/fluct-out'))
            explicit = RunConfig().with_overrides({'output.directory': 'here'})
            self.assertEqual(explicit.output_dir, Path('here'))

    def test_default_output_dir(self):
        """Test ./results without configuration or environment."""
        with patch.dict('os.environ', {}, clear=True):
            self.assertEqual(RunConfig().output_dir, Path('results'))
            self.assertIsNone(RunConfig().workers)

    def test_workers_from_environment(self):
        """Test FLUCT_CHAIN_WORKERS parsing."""
        with patch.dict('os.environ', {WORKERS_ENV: '4'}):
            self.assertEqual(RunConfig().workers, 4)
        with patch.dict('os.environ', {WORKERS_ENV: 'many'}):
            with self.assertRaises(ConfigError):
                RunConfig().workers


if __name__ == '__main__':
    unittest.main()
