"""
Configuration loader for experiment runs.
"""
import json
import yaml
import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Any, Optional, Union

from ..models.chain_model import BOUNDARIES, NOISE_MODES, ChainSpec

logger = logging.getLogger(__name__)

EXPERIMENTS = ('ensemble', 'exact', 'lindblad', 'bounds', 'analyze', 'mixing')
OUTPUT_DIR_ENV = 'FLUCT_CHAIN_OUTPUT_DIR'
WORKERS_ENV = 'FLUCT_CHAIN_WORKERS'
DEFAULT_OUTPUT_DIR = 'results'

MAX_LINDBLAD_SITES = 6
MAX_MIXING_SITES = 5


class ConfigError(ValueError):
    """Invalid configuration entry; `key` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


def _kind(kind: str, **kwargs):
    return field(metadata={'kind': kind}, **kwargs)


@dataclass
class ChainSection:
    n: int = _kind('int', default=50)
    boundary: str = _kind('str', default='open')
    hopping: float = _kind('float', default=1.0)


@dataclass
class NoiseSection:
    gamma: float = _kind('float', default=0.1)
    mode: str = _kind('str', default='dynamic')
    static_width: float = _kind('float', default=1.0)
    gammas: List[float] = _kind('float_list', default_factory=list)


@dataclass
class SimulationSection:
    trajectories: int = _kind('int', default=2000)
    dt: float = _kind('float', default=0.01)
    t_max: float = _kind('float', default=25.0)
    t_samples: int = _kind('int', default=101)
    seed: int = _kind('int', default=42)
    workers: Optional[int] = _kind('opt_int', default=None)
    source: Optional[int] = _kind('opt_int', default=None)
    initial_state: str = _kind('str', default='localized')


@dataclass
class LindbladSection:
    h0: str = _kind('str', default='xx')
    kind: str = _kind('str', default='isotropic')
    field: float = _kind('float', default=1.0)
    noise_x: float = _kind('float', default=0.0)
    noise_y: float = _kind('float', default=1.0)
    initial_spins: Optional[str] = _kind('opt_str', default=None)
    observable: str = _kind('str', default='Z')
    observable_site: Optional[int] = _kind('opt_int', default=None)
    probe_site: int = _kind('int', default=0)
    samples: int = _kind('int', default=20)


@dataclass
class BoundsSection:
    h0_norm: Optional[float] = _kind('opt_float', default=None)
    eps: float = _kind('float', default=1e-3)
    delta: float = _kind('float', default=0.04)
    sep: int = _kind('int', default=10)
    c_total: float = _kind('float', default=2.0)


@dataclass
class AnalysisSection:
    eps: float = _kind('float', default=1e-3)
    origin: Optional[int] = _kind('opt_int', default=None)
    fit_t_min: Optional[float] = _kind('opt_float', default=None)
    fit_t_max: Optional[float] = _kind('opt_float', default=None)


@dataclass
class OutputSection:
    directory: Optional[str] = _kind('opt_str', default=None)


SECTIONS = {
    'chain': ChainSection,
    'noise': NoiseSection,
    'simulation': SimulationSection,
    'lindblad': LindbladSection,
    'bounds': BoundsSection,
    'analysis': AnalysisSection,
    'output': OutputSection,
}


def _coerce(key: str, kind: str, value: Any) -> Any:
    optional = kind.startswith('opt_')
    base = kind[4:] if optional else kind
    if value is None:
        if optional:
            return None
        raise ConfigError(key, "must not be empty")
    if isinstance(value, bool):
        raise ConfigError(key, f"expected {base}, got boolean {value!r}")
    if base == 'int':
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if not isinstance(value, int):
            raise ConfigError(key, f"expected integer (got {value!r})")
        return value
    if base == 'float':
        if not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected number (got {value!r})")
        return float(value)
    if base == 'str':
        if not isinstance(value, str):
            raise ConfigError(key, f"expected string (got {value!r})")
        return value
    if base == 'float_list':
        items = value if isinstance(value, list) else [value]
        return [_coerce(f"{key}[{i}]", 'float', item) for i, item in enumerate(items)]
    raise ConfigError(key, f"unsupported kind {kind}")


def _build_section(name: str, data: Any):
    section_cls = SECTIONS[name]
    if data is None:
        return section_cls()
    if not isinstance(data, dict):
        raise ConfigError(name, f"section must be a mapping (got {type(data).__name__})")
    known = {f.name: f for f in fields(section_cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}", f"unknown key (allowed: {', '.join(known)})")
    values = {key: _coerce(f"{name}.{key}", known[key].metadata['kind'], value)
              for key, value in data.items()}
    return section_cls(**values)


@dataclass
class RunConfig:
    """Validated experiment configuration."""
    experiment: str = 'ensemble'
    chain: ChainSection = field(default_factory=ChainSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    lindblad: LindbladSection = field(default_factory=LindbladSection)
    bounds: BoundsSection = field(default_factory=BoundsSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Raise ConfigError naming the first entry outside its valid range."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError('experiment', f"must be one of {', '.join(EXPERIMENTS)} (got {self.experiment!r})")

        chain = self.chain
        if chain.boundary not in BOUNDARIES:
            raise ConfigError('chain.boundary', f"must be one of {', '.join(BOUNDARIES)} (got {chain.boundary!r})")
        if chain.n < 2:
            raise ConfigError('chain.n', f"must be >= 2 (got {chain.n})")
        if chain.hopping <= 0:
            raise ConfigError('chain.hopping', f"must be > 0 (got {chain.hopping})")
        if self.experiment == 'lindblad' and chain.n > MAX_LINDBLAD_SITES:
            raise ConfigError('chain.n', f"must be <= {MAX_LINDBLAD_SITES} for lindblad (got {chain.n})")
        if self.experiment == 'mixing' and chain.n > MAX_MIXING_SITES:
            raise ConfigError('chain.n', f"must be <= {MAX_MIXING_SITES} for mixing (got {chain.n})")

        noise = self.noise
        if noise.gamma < 0:
            raise ConfigError('noise.gamma', f"must be >= 0 (got {noise.gamma})")
        for i, g in enumerate(noise.gammas):
            if g < 0:
                raise ConfigError(f"noise.gammas[{i}]", f"must be >= 0 (got {g})")
        if noise.mode not in NOISE_MODES:
            raise ConfigError('noise.mode', f"must be one of {', '.join(NOISE_MODES)} (got {noise.mode!r})")
        if noise.static_width <= 0:
            raise ConfigError('noise.static_width', f"must be > 0 (got {noise.static_width})")

        sim = self.simulation
        if not 1 <= sim.trajectories <= 10 ** 7:
            raise ConfigError('simulation.trajectories', f"must be in [1, 10^7] (got {sim.trajectories})")
        if sim.dt <= 0:
            raise ConfigError('simulation.dt', f"must be > 0 (got {sim.dt})")
        if sim.t_max <= 0:
            raise ConfigError('simulation.t_max', f"must be > 0 (got {sim.t_max})")
        if sim.t_samples < 2:
            raise ConfigError('simulation.t_samples', f"must be >= 2 (got {sim.t_samples})")
        if sim.seed < 0:
            raise ConfigError('simulation.seed', f"must be >= 0 (got {sim.seed})")
        if sim.workers is not None and sim.workers < 1:
            raise ConfigError('simulation.workers', f"must be >= 1 (got {sim.workers})")
        if sim.source is not None and not 0 <= sim.source < chain.n:
            raise ConfigError('simulation.source', f"must be a site in [0, {chain.n}) (got {sim.source})")
        if sim.initial_state not in ('localized', 'wave_packet'):
            raise ConfigError('simulation.initial_state', f"must be localized or wave_packet (got {sim.initial_state!r})")

        lind = self.lindblad
        if lind.h0 not in ('xx', 'heisenberg', 'xx_field'):
            raise ConfigError('lindblad.h0', f"must be xx, heisenberg or xx_field (got {lind.h0!r})")
        if lind.kind not in ('isotropic', 'z-only'):
            raise ConfigError('lindblad.kind', f"must be isotropic or z-only (got {lind.kind!r})")
        if lind.initial_spins is not None and (len(lind.initial_spins) != chain.n
                                               or set(lind.initial_spins.lower()) - set('ud')):
            raise ConfigError('lindblad.initial_spins', f"must be {chain.n} letters over 'u'/'d' (got {lind.initial_spins!r})")
        if lind.observable.upper() not in ('X', 'Y', 'Z'):
            raise ConfigError('lindblad.observable', f"must be X, Y or Z (got {lind.observable!r})")
        for key, site in (('observable_site', lind.observable_site), ('probe_site', lind.probe_site)):
            if site is not None and not 0 <= site < chain.n:
                raise ConfigError(f"lindblad.{key}", f"must be a site in [0, {chain.n}) (got {site})")
        if lind.samples < 0:
            raise ConfigError('lindblad.samples', f"must be >= 0 (got {lind.samples})")

        bounds = self.bounds
        if bounds.h0_norm is not None and bounds.h0_norm <= 0:
            raise ConfigError('bounds.h0_norm', f"must be > 0 (got {bounds.h0_norm})")
        if not 0 < bounds.eps < 1:
            raise ConfigError('bounds.eps', f"must be in (0, 1) (got {bounds.eps})")
        if not 0 < bounds.delta <= 1:
            raise ConfigError('bounds.delta', f"must be in (0, 1] (got {bounds.delta})")
        if bounds.c_total <= 0:
            raise ConfigError('bounds.c_total', f"must be > 0 (got {bounds.c_total})")

        analysis = self.analysis
        if not 0 < analysis.eps < 1:
            raise ConfigError('analysis.eps', f"must be in (0, 1) (got {analysis.eps})")
        if analysis.origin is not None and not 0 <= analysis.origin < chain.n:
            raise ConfigError('analysis.origin', f"must be a site in [0, {chain.n}) (got {analysis.origin})")
        if (analysis.fit_t_min is not None and analysis.fit_t_max is not None
                and analysis.fit_t_min >= analysis.fit_t_max):
            raise ConfigError('analysis.fit_t_min', f"must be < fit_t_max ({analysis.fit_t_max})")

    @property
    def gammas(self) -> List[float]:
        """Noise strengths to sweep; falls back to the single gamma."""
        return list(self.noise.gammas) or [self.noise.gamma]

    @property
    def output_dir(self) -> Path:
        """Configured directory, else FLUCT_CHAIN_OUTPUT_DIR, else ./results."""
        return Path(self.output.directory or os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR))

    @property
    def workers(self) -> Optional[int]:
        if self.simulation.workers is not None:
            return self.simulation.workers
        env = os.environ.get(WORKERS_ENV)
        if not env:
            return None
        try:
            return int(env)
        except ValueError:
            raise ConfigError(WORKERS_ENV, f"expected integer (got {env!r})")

    def chain_spec(self, gamma: Optional[float] = None) -> ChainSpec:
        """ChainSpec for this run at the given (default: configured) gamma."""
        return ChainSpec(
            n=self.chain.n,
            boundary=self.chain.boundary,
            gamma=self.noise.gamma if gamma is None else gamma,
            noise_mode=self.noise.mode,
            hopping=self.chain.hopping,
            static_width=self.noise.static_width,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Nested dictionary in the file layout."""
        data: Dict[str, Any] = {'experiment': self.experiment}
        for name in SECTIONS:
            section = getattr(self, name)
            data[name] = {f.name: getattr(section, f.name) for f in fields(section)}
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """Strictly parse a nested dictionary."""
        if not isinstance(data, dict):
            raise ConfigError('config', f"top level must be a mapping (got {type(data).__name__})")
        unknown = sorted(set(data) - set(SECTIONS) - {'experiment'})
        if unknown:
            raise ConfigError(unknown[0], f"unknown section (allowed: experiment, {', '.join(SECTIONS)})")
        experiment = _coerce('experiment', 'str', data.get('experiment', 'ensemble'))
        sections = {name: _build_section(name, data.get(name)) for name in SECTIONS}
        return cls(experiment=experiment, **sections)

    def with_overrides(self, overrides: Dict[str, Any]) -> 'RunConfig':
        """
        Copy with dotted-key overrides applied, e.g. {'noise.gamma': 0.2}.

        None values are skipped so unset CLI flags leave the file values alone.
        """
        data = self.to_dict()
        for dotted, value in overrides.items():
            if value is None:
                continue
            if dotted == 'experiment':
                data['experiment'] = value
                continue
            section, _, key = dotted.partition('.')
            if section not in SECTIONS or not key:
                raise ConfigError(dotted, "override must name section.key")
            data[section][key] = value
        return RunConfig.from_dict(data)


class ConfigLoader:
    """
    Configuration loader for experiment runs.

    Supports loading from JSON and YAML files.
    """

    @staticmethod
    def load_file(file_path: Union[str, Path]) -> Dict[str, Any]:
        """
        Load configuration from a file.

        Args:
            file_path: Path to the configuration file

        Returns:
            Dictionary containing the configuration
        """
        file_path = Path(file_path)

        if not file_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {file_path}")

        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                if file_path.suffix.lower() in ['.yaml', '.yml']:
                    return yaml.safe_load(f) or {}
                elif file_path.suffix.lower() == '.json':
                    return json.load(f)
                else:
                    return ConfigLoader._parse_text(f.read())

        except Exception as e:
            logger.error(f"Failed to load configuration from {file_path}: {e}")
            raise

    @staticmethod
    def _parse_text(text: str) -> Dict[str, Any]:
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            try:
                return yaml.safe_load(text) or {}
            except yaml.YAMLError as e:
                raise ConfigError('config', f"not valid YAML or JSON ({e})")

    @staticmethod
    def save_file(data: Dict[str, Any], file_path: Union[str, Path], format: str = 'yaml') -> None:
        """
        Save configuration to a file.

        Args:
            data: Configuration data to save
            file_path: Path to save the configuration
            format: File format ('yaml' or 'json')
        """
        file_path = Path(file_path)

        try:
            with open(file_path, 'w', encoding='utf-8') as f:
                if format.lower() == 'json':
                    json.dump(data, f, indent=2)
                else:
                    yaml.safe_dump(data, f, default_flow_style=False, indent=2, sort_keys=False)

            logger.info(f"Configuration saved to {file_path}")

        except Exception as e:
            logger.error(f"Failed to save configuration to {file_path}: {e}")
            raise

    @staticmethod
    def parse_config(text: str) -> RunConfig:
        """
        Parse configuration text (YAML or JSON) into a validated RunConfig.

        Args:
            text: Configuration document

        Returns:
            RunConfig
        """
        return RunConfig.from_dict(ConfigLoader._parse_text(text))

    @staticmethod
    def load_config(file_path: Union[str, Path]) -> RunConfig:
        """Load and validate a configuration file."""
        config = RunConfig.from_dict(ConfigLoader.load_file(file_path))
        logger.info(f"Loaded {config.experiment} configuration from {file_path}")
        return config

    @staticmethod
    def serialise(config: RunConfig, format: str = 'yaml') -> str:
        """Configuration as text; parse_config(serialise(c)) == c."""
        if format.lower() == 'json':
            return json.dumps(config.to_dict(), indent=2)
        return yaml.safe_dump(config.to_dict(), default_flow_style=False, indent=2, sort_keys=False)

    @staticmethod
    def save_config(config: RunConfig, file_path: Union[str, Path], format: str = 'yaml') -> None:
        ConfigLoader.save_file(config.to_dict(), file_path, format)

    @staticmethod
    def create_sample_config(file_path: Union[str, Path], format: str = 'yaml') -> None:
        """
        Create a sample configuration file reproducing the four-panel ensemble run.

        Args:
            file_path: Path to save the sample configuration
            format: File format ('yaml' or 'json')
        """
        sample = RunConfig(
            experiment='ensemble',
            chain=ChainSection(n=50, boundary='open'),
            noise=NoiseSection(gamma=0.1, gammas=[0.05, 0.1, 0.2, 0.5]),
            simulation=SimulationSection(trajectories=2000, dt=0.01, t_max=25.0, t_samples=101,
                                         seed=42, source=0),
        )
        ConfigLoader.save_config(sample, file_path, format)
        logger.info(f"Sample configuration created at {file_path}")
