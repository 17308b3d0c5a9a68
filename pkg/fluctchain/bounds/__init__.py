"""Closed-form bounds: Lieb-Robinson envelope, MSD, variance and Chebyshev radius."""

from .bound_curves import (
    CURVE_KINDS,
    REGIME_BALLISTIC,
    REGIME_LOCALISED,
    REGIME_THRESHOLD,
    SERIES_SWITCH,
    BoundCurve,
    RegimeReport,
    build_bound_curve,
    chebyshev_radius,
    envelope_log_slope,
    envelope_radius,
    lr_bound_log_rhs,
    lr_bound_rhs,
    msd_f,
    regime_classify,
    variance_bound,
)

__all__ = [
    "CURVE_KINDS",
    "REGIME_BALLISTIC",
    "REGIME_LOCALISED",
    "REGIME_THRESHOLD",
    "SERIES_SWITCH",
    "BoundCurve",
    "RegimeReport",
    "build_bound_curve",
    "chebyshev_radius",
    "envelope_log_slope",
    "envelope_radius",
    "lr_bound_log_rhs",
    "lr_bound_rhs",
    "msd_f",
    "regime_classify",
    "variance_bound",
]
