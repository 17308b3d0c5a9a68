"""Single-particle (one-fermion) engine for the noisy XX chain."""

from .single_particle_engine import (
    EnsembleStats,
    SingleParticleDensity,
    TrajectoryState,
    evolve_dephasing_density,
    evolve_trajectory,
    exact_averaged_correlation,
    localized_density,
    matrix_exponential_check,
    run_ensemble,
    wave_packet,
)

__all__ = [
    "EnsembleStats",
    "SingleParticleDensity",
    "TrajectoryState",
    "evolve_dephasing_density",
    "evolve_trajectory",
    "exact_averaged_correlation",
    "localized_density",
    "matrix_exponential_check",
    "run_ensemble",
    "wave_packet",
]
