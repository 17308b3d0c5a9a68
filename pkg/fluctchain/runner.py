"""
ExperimentRunner: dispatches a RunConfig to the engines and writes results.
"""
import logging
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from . import __version__
from .analysis import (
    abs_correlation_field,
    fit_decay_rate,
    fit_exponent,
    front_radius,
    momentum_series,
    msd_exponent_radius,
    msd_series,
)
from .bounds import build_bound_curve, envelope_radius, regime_classify
from .lindblad import (
    H0Spec,
    PauliOperatorRep,
    build_generator,
    build_structure_matrix,
    evolve_density,
    lr_commutator,
    pauli_expectations,
    rank_condition_report,
    relaxation_check,
    trace_distance,
)
from .models import ChainSpec, RngStreamSpec, build_hopping_matrix, sample_noise_path
from .single_particle import (
    SingleParticleDensity,
    evolve_dephasing_density,
    evolve_trajectory,
    exact_averaged_correlation,
    localized_density,
    run_ensemble,
    wave_packet,
)
from .utils.config_loader import RunConfig
from .utils.result_writer import RunRecord, emit_heatmap, write_csv, write_json, write_run_record

logger = logging.getLogger(__name__)

MIXING_TRACE_TOLERANCE = 1e-6


class ExperimentError(RuntimeError):
    """A module failure raised while running a named experiment."""

    def __init__(self, experiment: str, message: str):
        self.experiment = experiment
        super().__init__(f"{experiment} experiment failed: {message}")


def _tag(gamma: float) -> str:
    return f"g{gamma:g}"


class ExperimentRunner:
    """
    Runs one configured experiment and records how it was produced.

    Each experiment returns the files it wrote; run() checksums them into
    run_record.json next to the outputs.
    """

    def __init__(self, config: RunConfig, output_dir: Optional[Union[str, Path]] = None):
        """
        Initialize the runner.

        Args:
            config: Validated run configuration
            output_dir: Overrides the configured / environment output directory
        """
        self.config = config
        self.output_dir = Path(output_dir) if output_dir else config.output_dir
        self.notes: List[str] = []
        self._handlers: Dict[str, Callable[[], List[Path]]] = {
            'ensemble': self.run_ensemble_experiment,
            'exact': self.run_exact_experiment,
            'lindblad': self.run_lindblad_experiment,
            'bounds': self.run_bounds_experiment,
            'analyze': self.run_analysis_experiment,
            'mixing': self.run_mixing_experiment,
        }
        logger.info(f"ExperimentRunner initialized for '{config.experiment}' -> {self.output_dir}")

    def run(self) -> RunRecord:
        """
        Execute the configured experiment.

        Returns:
            RunRecord with checksums of every output file
        """
        experiment = self.config.experiment
        started = datetime.now(timezone.utc)
        clock = time.perf_counter()
        self.notes = []

        try:
            outputs = self._handlers[experiment]()
        except ExperimentError:
            raise
        except Exception as e:
            logger.error(f"Experiment '{experiment}' failed: {e}")
            raise ExperimentError(experiment, str(e)) from e

        record = RunRecord(
            experiment=experiment,
            version=__version__,
            seed=self.config.simulation.seed,
            config=self.config.to_dict(),
            started_at=started.isoformat(),
            wall_clock_seconds=time.perf_counter() - clock,
            notes=list(self.notes),
        )
        write_run_record(record, self.output_dir, outputs)
        logger.info(f"Experiment '{experiment}' wrote {len(outputs)} files in {record.wall_clock_seconds:.2f}s")
        return record

    def time_grid(self) -> np.ndarray:
        """t_samples points on [0, t_max], snapped to multiples of dt."""
        sim = self.config.simulation
        steps = np.unique(np.rint(np.linspace(0.0, sim.t_max / sim.dt, sim.t_samples)).astype(np.int64))
        return steps * sim.dt

    def _path(self, name: str) -> Path:
        return self.output_dir / name

    def _origin(self) -> int:
        origin = self.config.analysis.origin
        return self.config.chain.n // 2 if origin is None else origin

    def _source(self) -> int:
        source = self.config.simulation.source
        return 0 if source is None else source

    def _note(self, message: str) -> None:
        logger.warning(message)
        self.notes.append(message)

    def run_ensemble_experiment(self) -> List[Path]:
        """Single-realisation and ensemble-mean |c| heatmaps per gamma, plus MSD / momentum series."""
        cfg = self.config
        sim = cfg.simulation
        times = self.time_grid()
        source = self._source()
        outputs: List[Path] = []

        for gamma in cfg.gammas:
            chain = cfg.chain_spec(gamma)
            n = chain.n
            psi0 = None
            origin = source
            if sim.initial_state == 'wave_packet':
                origin = min(source, n - 2)
                psi0 = wave_packet(n, origin)
            stats = run_ensemble(chain, sim.trajectories, sim.seed, times, dt=sim.dt,
                                 sources=None if psi0 is not None else [source],
                                 initial_state=psi0, origin=origin if psi0 is not None else None,
                                 workers=cfg.workers)

            start = psi0.reshape(n, 1) if psi0 is not None else np.eye(n, dtype=complex)[:, [source]]
            steps = int(max(np.rint(times[-1] / sim.dt), 1))
            noise = sample_noise_path(chain, RngStreamSpec(sim.seed, 0), sim.dt, steps)
            single = np.stack([np.abs(state.amplitudes[:, 0])
                               for state in evolve_trajectory(chain, noise, times, start)])
            mean = np.abs(stats.mean_c[:, :, 0])

            tag = _tag(gamma)
            outputs += emit_heatmap(single, self._path(f"ensemble_{tag}_single"))
            outputs += emit_heatmap(mean, self._path(f"ensemble_{tag}_mean"))

            ring = chain.boundary == 'ring'
            msd = msd_series(stats, origin, ring=ring)
            mom = momentum_series(stats, ring=ring)
            front = front_radius(mean, origin, cfg.analysis.eps, times=stats.t_grid, ring=ring)
            front_single = front_radius(single, origin, cfg.analysis.eps, times=stats.t_grid, ring=ring)
            columns = {
                't': stats.t_grid,
                'msd': msd.values,
                'msd_stderr': msd.stderr,
                'momentum': mom.values,
                'momentum_stderr': mom.stderr,
                'front_radius': front.values,
                'front_radius_single': front_single.values,
            }
            if chain.noise_mode == 'dynamic':
                columns['msd_f'] = build_bound_curve('msd_f', stats.t_grid, gamma=gamma).values
            outputs.append(write_csv(self._path(f"ensemble_{tag}_series.csv"), columns))
            logger.info(f"Ensemble gamma={gamma}: front radius at t={stats.t_grid[-1]:g} is {front.values[-1]:g} "
                        f"(single realisation {front_single.values[-1]:g})")
        return outputs

    def run_exact_experiment(self) -> List[Path]:
        """Closed-form averaged correlations and exact dephasing-density evolution per gamma."""
        cfg = self.config
        times = self.time_grid()
        source = self._source()
        origin = self._origin()
        outputs: List[Path] = []

        for gamma in cfg.gammas:
            chain = cfg.chain_spec(gamma)
            tag = _tag(gamma)
            R = None if chain.boundary == 'infinite-analytic' else build_hopping_matrix(chain)
            corr = np.stack([np.abs(exact_averaged_correlation(chain, t, R)[:, source]) for t in times])
            outputs += emit_heatmap(corr, self._path(f"exact_{tag}_correlation"))
            if chain.boundary == 'infinite-analytic':
                continue

            densities = evolve_dephasing_density(chain, localized_density(chain.n, origin), times)
            populations = np.vstack([d.populations for d in densities])
            outputs += emit_heatmap(np.clip(populations, 0.0, None), self._path(f"exact_{tag}_density"))

            psi = wave_packet(chain.n, min(origin, chain.n - 2))
            packet = SingleParticleDensity(rho=np.outer(psi, psi.conj()), t=0.0)
            mom = momentum_series(evolve_dephasing_density(chain, packet, times), ring=chain.boundary == 'ring')
            msd = msd_series(densities, origin, ring=chain.boundary == 'ring')
            outputs.append(write_csv(self._path(f"exact_{tag}_series.csv"), {
                't': times,
                'msd': msd.values,
                'msd_f': build_bound_curve('msd_f', times, gamma=chain.effective_gamma).values,
                'momentum': mom.values,
                'momentum_exp_2gamma': np.exp(-2.0 * chain.effective_gamma * times),
            }))
        return outputs

    def _h0(self, n: Optional[int] = None) -> H0Spec:
        lind = self.config.lindblad
        return H0Spec.preset(lind.h0, n or self.config.chain.n, field_strength=lind.field)

    def run_lindblad_experiment(self) -> List[Path]:
        """Magnetisation, distance to the maximally mixed state and the commutator-vs-bound series."""
        cfg = self.config
        lind = cfg.lindblad
        n = cfg.chain.n
        times = self.time_grid()
        h0 = self._h0()
        outputs: List[Path] = []

        spins = lind.initial_spins or 'u' + 'd' * (n - 1)
        rho0 = PauliOperatorRep.product_state(spins)
        mixed = PauliOperatorRep.maximally_mixed(n).to_dense()
        R = build_hopping_matrix(ChainSpec(n=n, boundary='ring' if cfg.chain.boundary == 'ring' else 'open'))

        for gamma in cfg.gammas:
            gen = build_generator(h0, lind.kind, gamma, noise_x=lind.noise_x, noise_y=lind.noise_y)
            tag = _tag(gamma)
            densities = evolve_density(gen, rho0, times)
            columns = {'t': times}
            magnetisation = np.vstack([pauli_expectations(rho, 'Z') for rho in densities])
            for site in range(n):
                columns[f"sz_{site}"] = magnetisation[:, site]
            columns['trace_distance_mixed'] = [trace_distance(rho.to_dense(), mixed) for rho in densities]
            outputs.append(write_csv(self._path(f"lindblad_{tag}_state.csv"), columns))

            if n > 5:
                logger.info(f"Skipping commutator series for n={n} (dense norms need n <= 5)")
                continue
            site_b = n - 1 if lind.observable_site is None else lind.observable_site
            b0 = PauliOperatorRep.single_site(n, site_b, lind.observable)
            c0 = [lr_commutator(gen, b0, j, 0.0, samples=lind.samples, seed=cfg.simulation.seed) for j in range(n)]
            commutator = [lr_commutator(gen, b0, lind.probe_site, t, samples=lind.samples,
                                        seed=cfg.simulation.seed) for t in times]
            envelope = build_bound_curve('lr_envelope', times, x=lind.probe_site, gamma=gamma,
                                         h0_norm=h0.h0_norm, c0=c0, R=R)
            outputs.append(write_csv(self._path(f"lindblad_{tag}_commutator.csv"), {
                't': times,
                'commutator': commutator,
                'lr_bound': envelope.values,
            }))
        return outputs

    def _h0_norm(self) -> float:
        if self.config.bounds.h0_norm is not None:
            return self.config.bounds.h0_norm
        if self.config.chain.n > 6:
            raise ValueError("bounds.h0_norm must be set when chain.n > 6")
        return self._h0().h0_norm

    def run_bounds_experiment(self) -> List[Path]:
        """BoundCurve CSVs on the run's time grid plus a regime report per gamma."""
        cfg = self.config
        bounds = cfg.bounds
        n = cfg.chain.n
        times = self.time_grid()
        h0_norm = self._h0_norm()
        R = build_hopping_matrix(ChainSpec(n=n, boundary='ring' if cfg.chain.boundary == 'ring' else 'open'))
        site_b = n - 1 if cfg.lindblad.observable_site is None else cfg.lindblad.observable_site
        c0 = np.zeros(n)
        c0[site_b] = bounds.c_total
        outputs: List[Path] = []

        for gamma in cfg.gammas:
            tag = _tag(gamma)
            curves = {
                'msd_f': build_bound_curve('msd_f', times, gamma=gamma),
                'variance_bound': build_bound_curve('variance_bound', times, sep=bounds.sep, gamma=gamma),
                'chebyshev_radius': build_bound_curve('chebyshev_radius', times, gamma=gamma, delta=bounds.delta),
                'lr_envelope': build_bound_curve('lr_envelope', times, x=cfg.lindblad.probe_site, gamma=gamma,
                                                 h0_norm=h0_norm, c0=c0, R=R),
            }
            columns = {'t': times}
            columns.update({name: curve.values for name, curve in curves.items()})
            outputs.append(write_csv(self._path(f"bounds_{tag}.csv"), columns))

            if gamma <= 0:
                logger.info("Skipping regime report for gamma=0")
                continue
            report = regime_classify(gamma, h0_norm, bounds.c_total, bounds.eps)
            radius = envelope_radius(gamma, h0_norm, float(times[-1]), bounds.eps, bounds.c_total)
            outputs.append(write_json(self._path(f"bounds_{tag}_regime.json"), {
                'regime': report.to_dict(),
                'envelope_radius': radius,
                'kappa_eps': radius / float(times[-1]),
                'at_time': float(times[-1]),
            }))
        return outputs

    def _fit_window(self, gamma: float, t_end: float):
        analysis = self.config.analysis
        t_min = analysis.fit_t_min
        if t_min is None:
            t_min = max(3.0, min(10.0 / gamma, 0.5 * t_end)) if gamma > 0 else 3.0
        t_max = t_end if analysis.fit_t_max is None else analysis.fit_t_max
        return (t_min, t_max)

    def run_analysis_experiment(self) -> List[Path]:
        """Propagation exponents and the momentum decay rate for the configured chain."""
        cfg = self.config
        sim = cfg.simulation
        gamma = cfg.noise.gamma
        chain = cfg.chain_spec(gamma)
        ring = chain.boundary == 'ring'
        times = self.time_grid()
        origin = self._origin()
        window = self._fit_window(chain.effective_gamma, float(times[-1]))
        report: Dict[str, object] = {'gamma': gamma, 'noise_mode': chain.noise_mode, 'window': list(window)}

        if chain.noise_mode == 'static':
            stats = run_ensemble(chain, sim.trajectories, sim.seed, times, dt=sim.dt,
                                 sources=[origin], workers=cfg.workers)
            msd = msd_series(stats, origin, ring=ring)
            field_values = stats.mean_abs2[:, :, 0]
        else:
            densities = evolve_dephasing_density(chain, localized_density(chain.n, origin), times)
            msd = msd_series(densities, origin, ring=ring)
            field_values = np.clip(np.vstack([d.populations for d in densities]), 0.0, None)

        radius = msd_exponent_radius(msd)
        front = front_radius(field_values, origin, cfg.analysis.eps, times=msd.times, ring=ring)
        report['msd_fit'] = fit_exponent(radius, window).to_dict()
        report['front_fit'] = fit_exponent(front, window).to_dict()

        columns = {'t': msd.times, 'msd': msd.values, 'msd_stderr': msd.stderr,
                   'msd_radius': radius.values, 'front_radius': front.values}

        if chain.noise_mode == 'dynamic' and chain.gamma > 0:
            psi = wave_packet(chain.n, min(origin, chain.n - 2))
            packet = SingleParticleDensity(rho=np.outer(psi, psi.conj()), t=0.0)
            mom = momentum_series(evolve_dephasing_density(chain, packet, times), ring=ring)
            decay_window = (0.0, min(float(times[-1]), 5.0 / chain.gamma))
            decay = fit_decay_rate(mom, decay_window)
            report['momentum_fit'] = decay.to_dict()
            report['momentum_rate_over_gamma'] = decay.rate / chain.gamma
            columns['momentum'] = mom.values
            self._note(f"Momentum decays at rate {decay.rate:.4g} = {decay.rate / chain.gamma:.3f} gamma; "
                       f"the generator predicts 2 gamma, not the single-gamma law exp(-gamma t)")

        outputs = [write_csv(self._path('analysis_series.csv'), columns),
                   write_json(self._path('analysis_report.json'), report)]
        return outputs

    def run_mixing_experiment(self) -> List[Path]:
        """Structure matrix, rank report, spectral gap and relaxation verdict."""
        cfg = self.config
        lind = cfg.lindblad
        n = cfg.chain.n
        h0 = self._h0()
        gamma = cfg.noise.gamma
        outputs: List[Path] = []

        structure = build_structure_matrix(h0)
        F_path = self._path('mixing_F.txt')
        F_path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(F_path, structure.F, fmt='%.12e',
                   header=f"F[alpha, beta] for {h0.name} on {n} sites (Pauli index order)")
        outputs.append(F_path)

        rank = rank_condition_report(structure)
        gen = build_generator(h0, lind.kind, gamma, noise_x=lind.noise_x, noise_y=lind.noise_y)
        relaxation = relaxation_check(gen)

        horizon = 20.0 / gamma if gamma > 0 else cfg.simulation.t_max
        if relaxation.gap > 0 and np.isfinite(relaxation.gap):
            horizon = max(horizon, 40.0 / relaxation.gap)
        spins = lind.initial_spins or 'u' + 'd' * (n - 1)
        final = evolve_density(gen, PauliOperatorRep.product_state(spins), [horizon])[0]
        distance = trace_distance(final.to_dense(), PauliOperatorRep.maximally_mixed(n).to_dense())

        outputs.append(write_json(self._path('mixing_rank.json'), rank))
        outputs.append(write_json(self._path('mixing_relaxation.json'), relaxation))
        outputs.append(write_json(self._path('mixing_verdict.json'), {
            'h0': h0.name,
            'kind': lind.kind,
            'gamma': gamma,
            'maximally_mixing': relaxation.maximally_mixing,
            'rank_condition_full': rank.full_rank,
            'horizon': horizon,
            'trace_distance_at_horizon': distance,
            'reached_mixed_state': bool(distance < MIXING_TRACE_TOLERANCE),
        }))
        logger.info(f"Mixing verdict for {h0.name}, gamma={gamma}: mixing={relaxation.maximally_mixing}, "
                    f"trace distance {distance:.3g} at t={horizon:.4g}")
        return outputs
