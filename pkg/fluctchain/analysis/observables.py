"""
Observables and regime fits built from engine output.

Turns ensemble statistics or density series into mean squared displacement,
momentum and light-cone front series, and fits propagation exponents and
decay rates to them.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from dataclasses_json import dataclass_json
from scipy.stats import linregress

from ..single_particle.single_particle_engine import EnsembleStats, SingleParticleDensity

logger = logging.getLogger(__name__)

SERIES_NAMES = ('msd', 'momentum', 'front_radius')
MIN_FIT_SAMPLES = 8
BOUNDARY_MASS_WARNING = 1e-8

DensitySeries = Sequence[SingleParticleDensity]


@dataclass
class ObservableSeries:
    """A scalar observable sampled in time, with standard errors."""
    name: str
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SERIES_NAMES:
            raise ValueError(f"name must be one of {SERIES_NAMES} (got {self.name!r})")
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if not (self.times.shape == self.values.shape == self.stderr.shape) or self.times.ndim != 1:
            raise ValueError("times, values and stderr must be 1-D arrays of equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.stderr < 0):
            raise ValueError("stderr must be >= 0")

    @property
    def samples(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.times.tolist(), self.values.tolist(), self.stderr.tolist()))

    def within(self, window: Tuple[float, float]) -> 'ObservableSeries':
        """Samples with t_min <= t <= t_max."""
        t_min, t_max = window
        mask = (self.times >= t_min) & (self.times <= t_max)
        return ObservableSeries(self.name, self.times[mask], self.values[mask],
                                self.stderr[mask], dict(self.metadata))


@dataclass_json
@dataclass
class ExponentFit:
    """radius ~ t^alpha from a log-log least-squares fit."""
    alpha: float
    alpha_err: float
    window: Tuple[float, float]
    r_squared: float
    samples_used: int
    localised: bool = False


@dataclass_json
@dataclass
class DecayFit:
    """|value| ~ exp(-rate t) from a log-linear least-squares fit."""
    rate: float
    rate_err: float
    window: Tuple[float, float]
    r_squared: float
    samples_used: int


def _distances(n: int, origin: int, ring: bool) -> np.ndarray:
    dist = np.abs(np.arange(n) - origin)
    if ring:
        dist = np.minimum(dist, n - dist)
    return dist


def density_profiles(densities: DensitySeries) -> Tuple[np.ndarray, np.ndarray]:
    """(times, populations[time, site]) of a density series."""
    if not densities:
        raise ValueError("density series is empty")
    times = np.array([d.t for d in densities], dtype=float)
    return times, np.vstack([d.populations for d in densities])


def abs_correlation_field(stats: EnsembleStats, source: int) -> np.ndarray:
    """|mean c_{j,source}(t)| as a [time, site] array."""
    return np.abs(stats.mean_c[:, :, stats.column(source)])


def msd_series(data: Union[DensitySeries, EnsembleStats], origin: int,
               ring: bool = False) -> ObservableSeries:
    """
    Mean squared displacement about origin.

    Args:
        data: Density series, or ensemble statistics with origin tracked
            as a source (or as the wave-packet origin)
        origin: Reference site (0-based)
        ring: Use minimal-image distances

    Returns:
        ObservableSeries named 'msd'
    """
    if isinstance(data, EnsembleStats):
        n = data.mean_abs2.shape[1]
        if not 0 <= origin < n:
            raise ValueError(f"origin must be in [0, {n}) (got {origin})")
        if data.sources is None:
            if data.origin != origin:
                raise ValueError(f"wave-packet ensemble was accumulated about site {data.origin}, not {origin}")
            col = 0
        else:
            col = data.column(origin)
        stderr = np.nan_to_num(data.msd_stderr[:, col], nan=0.0)
        return ObservableSeries('msd', data.t_grid, data.msd_mean[:, col], stderr,
                                {'source': 'ensemble', 'origin': origin, 'trajectories': data.traj_count})

    times, populations = density_profiles(data)
    n = populations.shape[1]
    if not 0 <= origin < n:
        raise ValueError(f"origin must be in [0, {n}) (got {origin})")
    if not ring:
        edge_mass = populations[:, [0, -1]].sum(axis=1)
        touched = np.flatnonzero(edge_mass > BOUNDARY_MASS_WARNING)
        if touched.size:
            logger.warning(f"Boundary sites carry weight from t={times[touched[0]]:.4g}; "
                           f"MSD no longer matches the infinite-chain value")
    values = populations @ _distances(n, origin, ring).astype(float) ** 2
    return ObservableSeries('msd', times, values, np.zeros_like(values),
                            {'source': 'density', 'origin': origin})


def momentum_series(data: Union[DensitySeries, EnsembleStats], ring: bool = False,
                    column: int = 0) -> ObservableSeries:
    """
    <p>(t) with p = sum_j i(|j+1><j| - |j><j+1|), i.e. -2 sum_j Im rho_{j,j+1}.
    """
    if isinstance(data, EnsembleStats):
        stderr = np.nan_to_num(data.momentum_stderr[:, column], nan=0.0)
        return ObservableSeries('momentum', data.t_grid, data.momentum_mean[:, column], stderr,
                                {'source': 'ensemble', 'trajectories': data.traj_count})

    values = []
    for density in data:
        rho = np.asarray(density.rho)
        upper = np.diagonal(rho, offset=1)
        total = upper.imag.sum()
        if ring and rho.shape[0] > 2:
            total += rho[-1, 0].imag
        values.append(-2.0 * total)
    times = np.array([d.t for d in data], dtype=float)
    values = np.array(values)
    return ObservableSeries('momentum', times, values, np.zeros_like(values), {'source': 'density'})


def front_radius(field_values: np.ndarray, origin: int, eps: float,
                 times: Optional[Sequence[float]] = None, ring: bool = False) -> ObservableSeries:
    """
    Largest distance from origin at which the field reaches eps, per time.

    Args:
        field_values: Nonnegative [time, site] array (|c| or populations)
        origin: Reference site
        eps: Threshold in (0, 1)
        times: Sample times (default 0, 1, 2, ...)
        ring: Use minimal-image distances

    Returns:
        ObservableSeries named 'front_radius'; 0 where nothing reaches eps
    """
    values = np.asarray(field_values, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"field must be a [time, site] array (got shape {values.shape})")
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise ValueError("field values must be finite and nonnegative")
    if not 0 < eps < 1:
        raise ValueError(f"eps must be in (0, 1) (got {eps})")
    n = values.shape[1]
    if not 0 <= origin < n:
        raise ValueError(f"origin must be in [0, {n}) (got {origin})")
    if times is None:
        times = np.arange(values.shape[0], dtype=float)

    dist = _distances(n, origin, ring)
    reached = values >= eps
    radius = np.where(reached, dist[None, :], 0).max(axis=1).astype(float)
    return ObservableSeries('front_radius', times, radius, np.zeros_like(radius),
                            {'origin': origin, 'eps': eps})


def msd_exponent_radius(series: ObservableSeries) -> ObservableSeries:
    """sqrt(<x^2>) as a radius series, with first-order error propagation."""
    if series.name != 'msd':
        raise ValueError(f"expected an msd series (got {series.name!r})")
    radius = np.sqrt(np.maximum(series.values, 0.0))
    with np.errstate(divide='ignore', invalid='ignore'):
        stderr = np.where(radius > 0, series.stderr / (2.0 * radius), 0.0)
    metadata = dict(series.metadata, derived_from='msd')
    return ObservableSeries('front_radius', series.times, radius, stderr, metadata)


def fit_exponent(radius: ObservableSeries, window: Tuple[float, float]) -> ExponentFit:
    """
    Fit log radius against log t inside window.

    A window containing zero radii is reported as localised instead of fitted.
    """
    sub = radius.within(window)
    positive_t = sub.times > 0
    times, values = sub.times[positive_t], sub.values[positive_t]
    if times.size < MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} samples in window {window} (got {times.size})")
    if np.any(values <= 0):
        logger.info(f"Zero radius inside window {window}; reporting localised front")
        return ExponentFit(alpha=0.0, alpha_err=0.0, window=tuple(window), r_squared=0.0,
                           samples_used=int(times.size), localised=True)

    fit = linregress(np.log(times), np.log(values))
    r_squared = float(np.clip(fit.rvalue ** 2, 0.0, 1.0)) if np.isfinite(fit.rvalue) else 0.0
    logger.debug(f"Exponent fit on {window}: alpha={fit.slope:.4f} +/- {fit.stderr:.4f}")
    return ExponentFit(alpha=float(fit.slope), alpha_err=float(fit.stderr), window=tuple(window),
                       r_squared=r_squared, samples_used=int(times.size))


def fit_decay_rate(series: ObservableSeries, window: Tuple[float, float]) -> DecayFit:
    """Fit log|value| against t inside window; rate is minus the slope."""
    sub = series.within(window)
    if sub.times.size < MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} samples in window {window} (got {sub.times.size})")
    magnitude = np.abs(sub.values)
    if np.any(magnitude == 0):
        raise ValueError(f"{series.name} vanishes inside window {window}; no decay rate")
    fit = linregress(sub.times, np.log(magnitude))
    r_squared = float(np.clip(fit.rvalue ** 2, 0.0, 1.0)) if np.isfinite(fit.rvalue) else 0.0
    return DecayFit(rate=float(-fit.slope), rate_err=float(fit.stderr), window=tuple(window),
                    r_squared=r_squared, samples_used=int(sub.times.size))


def chebyshev_excursion_probability(populations: np.ndarray, origin: int,
                                    radius: Union[float, np.ndarray], ring: bool = False) -> np.ndarray:
    """
    Probability mass at distance >= radius from origin.

    Args:
        populations: [site] or [time, site] occupation probabilities
        origin: Reference site
        radius: Scalar or one radius per time
        ring: Use minimal-image distances

    Returns:
        Scalar array or one probability per time
    """
    pops = np.atleast_2d(np.asarray(populations, dtype=float))
    n = pops.shape[1]
    if not 0 <= origin < n:
        raise ValueError(f"origin must be in [0, {n}) (got {origin})")
    radii = np.broadcast_to(np.asarray(radius, dtype=float), (pops.shape[0],))
    outside = _distances(n, origin, ring)[None, :] >= radii[:, None]
    probability = np.sum(pops * outside, axis=1)
    return probability[0] if np.ndim(populations) == 1 else probability
