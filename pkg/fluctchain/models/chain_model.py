"""
Chain and noise model shared by every engine.

Defines the chain geometry, the fluctuating-field noise model, the hopping
matrix R and reproducible random streams.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple
import logging

import numpy as np

logger = logging.getLogger(__name__)

BOUNDARIES = ('open', 'ring', 'infinite-analytic')
NOISE_MODES = ('dynamic', 'static', 'none')


@dataclass(frozen=True)
class ChainSpec:
    """
    Description of a one-dimensional chain with a fluctuating on-site field.

    gamma is the amplitude-decay rate of the averaged correlation functions:
    in dynamic mode the phase accumulated on a site over one step dt is
    Normal(0, 2*gamma*dt), so that E[exp(-i phi)] = exp(-gamma*dt).
    """
    n: int
    boundary: str = 'open'
    gamma: float = 0.0
    noise_mode: str = 'dynamic'
    hopping: float = 1.0
    static_width: float = 1.0

    def __post_init__(self):
        """Validate the chain parameters."""
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"n must be a positive integer (got {self.n!r})")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES} (got {self.boundary!r})")
        if self.boundary != 'infinite-analytic' and self.n < 2:
            raise ValueError(f"n must be >= 2 for a {self.boundary} chain (got {self.n})")
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f"noise_mode must be one of {NOISE_MODES} (got {self.noise_mode!r})")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be >= 0 (got {self.gamma})")
        if not np.isfinite(self.hopping) or self.hopping < 0:
            raise ValueError(f"hopping must be >= 0 (got {self.hopping})")
        if not np.isfinite(self.static_width) or self.static_width < 0:
            raise ValueError(f"static_width must be >= 0 (got {self.static_width})")

    @property
    def effective_gamma(self) -> float:
        """Decay rate actually seen by the dynamics (0 when noise is off)."""
        return 0.0 if self.noise_mode == 'none' else float(self.gamma)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            'n': int(self.n),
            'boundary': self.boundary,
            'gamma': float(self.gamma),
            'noise_mode': self.noise_mode,
            'hopping': float(self.hopping),
            'static_width': float(self.static_width),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ChainSpec':
        """Create from dictionary."""
        return cls(
            n=int(data['n']),
            boundary=data.get('boundary', 'open'),
            gamma=float(data.get('gamma', 0.0)),
            noise_mode=data.get('noise_mode', 'dynamic'),
            hopping=float(data.get('hopping', 1.0)),
            static_width=float(data.get('static_width', 1.0)),
        )


@dataclass(frozen=True)
class RngStreamSpec:
    """
    Address of one independent random stream.

    The stream is derived from (master_seed, stream_index) through numpy's
    SeedSequence spawn keys, so distinct indices never overlap.
    """
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.master_seed < 0 or self.master_seed >= 2 ** 64:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer (got {self.master_seed})")
        if self.stream_index < 0:
            raise ValueError(f"stream_index must be >= 0 (got {self.stream_index})")

    def generator(self) -> np.random.Generator:
        """Return a fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(entropy=int(self.master_seed),
                                     spawn_key=(int(self.stream_index),))
        return np.random.default_rng(seq)


@dataclass(frozen=True)
class NoiseRealization:
    """One sampled disorder path: phase increments phi[step, site]."""
    seed: int
    stream_index: int
    dt: float
    steps: int
    phases: np.ndarray = field(repr=False)

    @property
    def duration(self) -> float:
        return self.steps * self.dt


@dataclass(frozen=True)
class HoppingMatrix:
    """Dense nearest-neighbour adjacency matrix R with 0/1 entries."""
    matrix: np.ndarray = field(repr=False)
    boundary: str = 'open'

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def spectrum(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Eigenpairs of R, eigenvalues ascending.

        The open chain uses the closed form 2cos(q*pi/(n+1)) with sine
        eigenvectors; the ring is diagonalised numerically since its Fourier
        modes are degenerate in pairs.

        Returns:
            Tuple of (eigenvalues, orthonormal eigenvector columns)
        """
        n = self.n
        if self.boundary == 'open':
            q = np.arange(n, 0, -1)
            energies = 2.0 * np.cos(q * np.pi / (n + 1))
            sites = np.arange(1, n + 1)
            vectors = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(sites, q) * np.pi / (n + 1))
            return energies, vectors
        return np.linalg.eigh(self.matrix)


def build_hopping_matrix(spec: ChainSpec) -> HoppingMatrix:
    """
    Build R with R[j, k] = 1 for nearest neighbours.

    Args:
        spec: Chain specification (open or ring)

    Returns:
        HoppingMatrix for the chain
    """
    if spec.boundary == 'infinite-analytic':
        raise ValueError("boundary 'infinite-analytic' has no hopping matrix; use the analytic evaluators")
    if spec.n < 2:
        raise ValueError(f"n must be >= 2 to build a hopping matrix (got {spec.n})")

    n = spec.n
    matrix = np.zeros((n, n))
    idx = np.arange(n - 1)
    matrix[idx, idx + 1] = 1.0
    matrix[idx + 1, idx] = 1.0
    if spec.boundary == 'ring' and n > 2:
        matrix[0, n - 1] = 1.0
        matrix[n - 1, 0] = 1.0
    return HoppingMatrix(matrix=matrix, boundary=spec.boundary)


def sample_noise_path(spec: ChainSpec, rng: RngStreamSpec, dt: float, steps: int,
                      width: Optional[float] = None) -> NoiseRealization:
    """
    Sample one realisation of the on-site field as per-step phases.

    Args:
        spec: Chain specification (noise mode and gamma)
        rng: Stream to draw from
        dt: Timestep
        steps: Number of steps
        width: Static disorder width W (defaults to spec.static_width)

    Returns:
        NoiseRealization with a (steps, n) phase array
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0 (got {dt})")
    if steps < 1:
        raise ValueError(f"steps must be >= 1 (got {steps})")

    n = spec.n
    generator = rng.generator()
    if spec.noise_mode == 'none' or (spec.noise_mode == 'dynamic' and spec.gamma == 0):
        phases = np.zeros((steps, n))
    elif spec.noise_mode == 'dynamic':
        phases = generator.normal(0.0, np.sqrt(2.0 * spec.gamma * dt), size=(steps, n))
    else:
        w = spec.static_width if width is None else width
        xi = generator.normal(0.0, w, size=n)
        phases = np.broadcast_to(xi * dt, (steps, n)).copy()

    phases.setflags(write=False)
    return NoiseRealization(seed=rng.master_seed, stream_index=rng.stream_index,
                            dt=float(dt), steps=int(steps), phases=phases)
