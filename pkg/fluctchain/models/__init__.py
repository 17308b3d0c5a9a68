"""Chain, noise and randomness models for fluct-chain."""

from .chain_model import (
    ChainSpec,
    HoppingMatrix,
    NoiseRealization,
    RngStreamSpec,
    build_hopping_matrix,
    sample_noise_path,
)

__all__ = [
    "ChainSpec",
    "HoppingMatrix",
    "NoiseRealization",
    "RngStreamSpec",
    "build_hopping_matrix",
    "sample_noise_path",
]
