"""Observables, light-cone fronts and exponent fits."""

from .observables import (
    DecayFit,
    ExponentFit,
    ObservableSeries,
    abs_correlation_field,
    chebyshev_excursion_probability,
    density_profiles,
    fit_decay_rate,
    fit_exponent,
    front_radius,
    momentum_series,
    msd_exponent_radius,
    msd_series,
)

__all__ = [
    "DecayFit",
    "ExponentFit",
    "ObservableSeries",
    "abs_correlation_field",
    "chebyshev_excursion_probability",
    "density_profiles",
    "fit_decay_rate",
    "fit_exponent",
    "front_radius",
    "momentum_series",
    "msd_exponent_radius",
    "msd_series",
]
