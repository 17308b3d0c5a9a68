"""
One-fermion sector of the noisy XX chain.

Stochastic split-step trajectories, ensemble statistics with a deterministic
reduction, the closed-form averaged propagator and the exact dephasing
density evolution.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.special import jv

from ..models.chain_model import (
    ChainSpec,
    HoppingMatrix,
    NoiseRealization,
    RngStreamSpec,
    build_hopping_matrix,
    sample_noise_path,
)

logger = logging.getLogger(__name__)

MAX_TRAJECTORIES = 10 ** 7
CHUNK_SIZE = 64
GRID_TOLERANCE = 1e-9


@dataclass
class TrajectoryState:
    """Amplitudes psi (vector, or one column per tracked source) at time t."""
    amplitudes: np.ndarray = field(repr=False)
    t: float = 0.0

    def norms(self) -> np.ndarray:
        """Euclidean norm of each column."""
        amps = self.amplitudes.reshape(self.amplitudes.shape[0], -1)
        return np.sqrt(np.sum(_abs2(amps), axis=0))


@dataclass
class EnsembleStats:
    """
    Moments of c_{j,k}(xi, t) over independent noise realisations.

    Arrays are indexed [time, site j, column]; columns are the tracked source
    sites, or a single column for a wave-packet run.
    """
    traj_count: int
    t_grid: np.ndarray
    sources: Optional[np.ndarray]
    mean_c: np.ndarray = field(repr=False)
    mean_abs2: np.ndarray = field(repr=False)
    var_c: np.ndarray = field(repr=False)
    stderr_c: np.ndarray = field(repr=False)
    stderr_abs2: np.ndarray = field(repr=False)
    stderr_var: np.ndarray = field(repr=False)
    msd_mean: np.ndarray = field(repr=False)
    msd_stderr: np.ndarray = field(repr=False)
    momentum_mean: np.ndarray = field(repr=False)
    momentum_stderr: np.ndarray = field(repr=False)
    master_seed: int = 0
    origin: Optional[int] = None

    def column(self, source: int) -> int:
        """Column index of a tracked source site."""
        if self.sources is None:
            raise ValueError("wave-packet ensembles have no per-source columns")
        matches = np.flatnonzero(self.sources == source)
        if matches.size == 0:
            raise ValueError(f"source {source} was not tracked (tracked: {self.sources.tolist()})")
        return int(matches[0])


@dataclass
class SingleParticleDensity:
    """One-particle density matrix rho at time t."""
    rho: np.ndarray = field(repr=False)
    t: float = 0.0

    def validate(self, tol: float = 1e-10) -> None:
        """Raise ValueError unless rho is a Hermitian, unit-trace, positive matrix."""
        rho = np.asarray(self.rho)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"rho must be a square matrix (got shape {rho.shape})")
        if not np.allclose(rho, rho.conj().T, atol=tol):
            raise ValueError("rho must be Hermitian")
        trace = np.trace(rho).real
        if abs(trace - 1.0) > tol:
            raise ValueError(f"rho must have unit trace (got {trace})")
        min_eig = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
        if min_eig < -tol:
            raise ValueError(f"rho must be positive semidefinite (min eigenvalue {min_eig})")

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()


def _abs2(z: np.ndarray) -> np.ndarray:
    return z.real ** 2 + z.imag ** 2


def localized_density(n: int, k: int) -> SingleParticleDensity:
    """|k><k| on an n-site chain."""
    rho = np.zeros((n, n), dtype=complex)
    rho[k, k] = 1.0
    return SingleParticleDensity(rho=rho, t=0.0)


def wave_packet(n: int, k: int) -> np.ndarray:
    """(e_k + i e_{k+1})/sqrt(2), a state with unit momentum."""
    if not 0 <= k < n - 1:
        raise ValueError(f"wave packet site k must satisfy 0 <= k < n-1 (got {k})")
    psi = np.zeros(n, dtype=complex)
    psi[k] = 1.0 / np.sqrt(2.0)
    psi[k + 1] = 1j / np.sqrt(2.0)
    return psi


def step_propagator(chain: ChainSpec, dt: float,
                    hopping_matrix: Optional[HoppingMatrix] = None) -> np.ndarray:
    """exp(-i J R dt) from the eigendecomposition of R (J = chain.hopping)."""
    R = hopping_matrix or build_hopping_matrix(chain)
    energies, vectors = R.spectrum()
    phases = np.exp(-1j * chain.hopping * energies * dt)
    return (vectors * phases) @ vectors.T


def _grid_steps(t_grid: Sequence[float], dt: float, max_steps: Optional[int] = None) -> np.ndarray:
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("t_grid must be a non-empty list of times")
    if np.any(times < 0):
        raise ValueError("t_grid must be nonnegative")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    steps = np.rint(times / dt).astype(np.int64)
    if np.any(np.abs(steps * dt - times) > GRID_TOLERANCE * np.maximum(1.0, times)):
        raise ValueError(f"t_grid points must be multiples of dt={dt}")
    if max_steps is not None and steps[-1] > max_steps:
        raise ValueError(
            f"t_grid extends to t={times[-1]} beyond the noise path length {max_steps * dt}"
        )
    return steps


def _propagate(U: np.ndarray, phases: np.ndarray, psi0: np.ndarray,
               record_steps: np.ndarray) -> np.ndarray:
    """Split-step evolution; returns amplitudes at each recorded step."""
    out = np.empty((record_steps.size,) + psi0.shape, dtype=complex)
    psi = psi0.astype(complex, copy=True)
    column_kick = psi.ndim == 2
    slot = 0
    for step in range(int(record_steps[-1]) + 1):
        while slot < record_steps.size and record_steps[slot] == step:
            out[slot] = psi
            slot += 1
        if step == record_steps[-1]:
            break
        kick = np.exp(-1j * phases[step])
        psi = U @ psi
        if column_kick:
            psi *= kick[:, None]
        else:
            psi *= kick
    return out


def evolve_trajectory(chain: ChainSpec, noise: NoiseRealization, t_grid: Sequence[float],
                      initial_state: Optional[np.ndarray] = None) -> List[TrajectoryState]:
    """
    Evolve one noise realisation with the split-step scheme.

    Each step applies exp(-i R dt), precomputed once, then the diagonal phase
    kick exp(-i phi_j). Both factors are unitary.

    Args:
        chain: Chain specification (open or ring)
        noise: Sampled noise path
        t_grid: Strictly increasing times, multiples of noise.dt
        initial_state: Vector or matrix of columns (defaults to the identity,
            i.e. every source site tracked)

    Returns:
        List of TrajectoryState, one per requested time
    """
    if chain.boundary == 'infinite-analytic':
        raise ValueError("trajectories need a finite chain (open or ring)")
    if noise.phases.shape != (noise.steps, chain.n):
        raise ValueError(f"noise path shape {noise.phases.shape} does not match chain n={chain.n}")

    steps = _grid_steps(t_grid, noise.dt, max_steps=noise.steps)
    psi0 = np.eye(chain.n, dtype=complex) if initial_state is None else np.asarray(initial_state, dtype=complex)
    U = step_propagator(chain, noise.dt)
    amplitudes = _propagate(U, noise.phases, psi0, steps)
    return [TrajectoryState(amplitudes=amplitudes[i], t=float(steps[i] * noise.dt))
            for i in range(steps.size)]


def _displacement_weights(chain: ChainSpec, origins: np.ndarray) -> np.ndarray:
    sites = np.arange(chain.n)
    dist = np.abs(sites[:, None] - origins[None, :])
    if chain.boundary == 'ring':
        dist = np.minimum(dist, chain.n - dist)
    return dist.astype(float) ** 2


def _momentum(amplitudes: np.ndarray, ring: bool) -> np.ndarray:
    """<p> = -2 sum_j Im(psi_j conj(psi_{j+1})) for amplitudes[..., site, column]."""
    # a two-site ring has a single bond, like the open chain
    ring = ring and amplitudes.shape[-2] > 2
    nxt = np.roll(amplitudes, -1, axis=-2) if ring else amplitudes[..., 1:, :]
    cur = amplitudes if ring else amplitudes[..., :-1, :]
    return -2.0 * np.sum(np.imag(cur * nxt.conj()), axis=-2)


def _run_chunk(task: Tuple[Dict[str, Any], int, int, int, float, np.ndarray,
                           np.ndarray, np.ndarray]) -> Dict[str, np.ndarray]:
    """Accumulate moment sums for trajectories [start, stop) in index order."""
    chain_dict, master_seed, start, stop, dt, record_steps, psi0, weights = task
    chain = ChainSpec.from_dict(chain_dict)
    U = step_propagator(chain, dt)
    steps = int(max(record_steps[-1], 1))
    ring = chain.boundary == 'ring'

    sums: Dict[str, np.ndarray] = {}
    for index in range(start, stop):
        noise = sample_noise_path(chain, RngStreamSpec(master_seed, index), dt, steps)
        amps = _propagate(U, noise.phases, psi0, record_steps)
        abs2 = _abs2(amps)
        msd = np.einsum('tjm,jm->tm', abs2, weights)
        mom = _momentum(amps, ring)
        terms = {
            'c': amps,
            'abs2': abs2,
            'abs4': abs2 ** 2,
            'msd': msd,
            'msd2': msd ** 2,
            'p': mom,
            'p2': mom ** 2,
        }
        if not sums:
            sums = {key: value.copy() for key, value in terms.items()}
        else:
            for key, value in terms.items():
                sums[key] += value
    return sums


def _stderr(second_moment: np.ndarray, mean: np.ndarray, count: int) -> np.ndarray:
    if count < 2:
        return np.full(mean.shape, np.nan)
    sample_var = np.maximum(second_moment - mean ** 2, 0.0) * count / (count - 1)
    return np.sqrt(sample_var / count)


def run_ensemble(chain: ChainSpec, traj_count: int, master_seed: int, t_grid: Sequence[float],
                 dt: float = 0.01, sources: Optional[Sequence[int]] = None,
                 initial_state: Optional[np.ndarray] = None, origin: Optional[int] = None,
                 workers: Optional[int] = None) -> EnsembleStats:
    """
    Average trajectories over traj_count independent noise paths.

    Trajectory i draws from stream (master_seed, i). Trajectories are grouped
    in fixed chunks of CHUNK_SIZE and chunk sums are reduced in chunk order,
    so the result does not depend on the number of workers.

    Args:
        chain: Chain specification
        traj_count: Number of trajectories
        master_seed: Seed for all streams
        t_grid: Output times (multiples of dt)
        dt: Timestep
        sources: Source sites to track (default: all)
        initial_state: Wave-packet start vector; overrides sources
        origin: Reference site for the wave-packet MSD (default: site of max weight)
        workers: Process count; None or 1 runs serially

    Returns:
        EnsembleStats
    """
    if traj_count < 1:
        raise ValueError(f"traj_count must be >= 1 (got {traj_count})")
    if traj_count > MAX_TRAJECTORIES:
        raise ValueError(f"traj_count must be <= {MAX_TRAJECTORIES} (got {traj_count})")
    if chain.boundary == 'infinite-analytic':
        raise ValueError("ensembles need a finite chain (open or ring)")
    if not dt > 0:
        raise ValueError(f"dt must be > 0 (got {dt})")

    record_steps = _grid_steps(t_grid, dt)
    n = chain.n
    if initial_state is not None:
        psi0 = np.asarray(initial_state, dtype=complex).reshape(n, 1)
        norm = np.linalg.norm(psi0)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"initial_state must be normalised (norm {norm})")
        source_arr = None
        if origin is None:
            origin = int(np.argmax(_abs2(psi0[:, 0])))
        origins = np.array([origin])
    else:
        source_arr = np.arange(n) if sources is None else np.asarray(sources, dtype=int)
        if source_arr.size == 0 or source_arr.min() < 0 or source_arr.max() >= n:
            raise ValueError(f"sources must be sites in [0, {n}) (got {source_arr.tolist()})")
        psi0 = np.eye(n, dtype=complex)[:, source_arr]
        origins = source_arr
    weights = _displacement_weights(chain, origins)

    tasks = []
    for start in range(0, traj_count, CHUNK_SIZE):
        stop = min(start + CHUNK_SIZE, traj_count)
        tasks.append((chain.to_dict(), int(master_seed), start, stop, float(dt),
                      record_steps, psi0, weights))

    logger.info(f"Running {traj_count} trajectories in {len(tasks)} chunks "
                f"(n={n}, gamma={chain.gamma}, mode={chain.noise_mode}, workers={workers or 1})")

    if workers is not None and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            partials = list(executor.map(_run_chunk, tasks))
    else:
        partials = []
        for i, task in enumerate(tasks):
            partials.append(_run_chunk(task))
            logger.debug(f"Finished chunk {i + 1}/{len(tasks)}")

    totals = {key: value.copy() for key, value in partials[0].items()}
    for partial in partials[1:]:
        for key, value in partial.items():
            totals[key] += value

    count = traj_count
    mean_c = totals['c'] / count
    mean_abs2 = totals['abs2'] / count
    mean_abs4 = totals['abs4'] / count
    var_c = mean_abs2 - _abs2(mean_c)

    if count < 2:
        stderr_c = np.full(mean_abs2.shape, np.nan)
    else:
        stderr_c = np.sqrt(np.maximum(var_c, 0.0) * count / (count - 1) / count)
    stderr_abs2 = _stderr(mean_abs4, mean_abs2, count)
    stderr_var = np.sqrt(stderr_abs2 ** 2 + (2.0 * np.abs(mean_c) * stderr_c) ** 2)

    msd_mean = totals['msd'] / count
    p_mean = totals['p'] / count

    stats = EnsembleStats(
        traj_count=count,
        t_grid=record_steps * dt,
        sources=source_arr,
        mean_c=mean_c,
        mean_abs2=mean_abs2,
        var_c=var_c,
        stderr_c=stderr_c,
        stderr_abs2=stderr_abs2,
        stderr_var=stderr_var,
        msd_mean=msd_mean,
        msd_stderr=_stderr(totals['msd2'] / count, msd_mean, count),
        momentum_mean=p_mean,
        momentum_stderr=_stderr(totals['p2'] / count, p_mean, count),
        master_seed=int(master_seed),
        origin=None if origin is None else int(origin),
    )
    logger.info(f"Ensemble complete: {count} trajectories, {record_steps.size} time points")
    return stats


def exact_averaged_correlation(chain: ChainSpec, t: float,
                               hopping_matrix: Optional[HoppingMatrix] = None) -> np.ndarray:
    """
    Closed-form averaged correlations c_{j,k}(t) = exp(-gamma t) (exp(-i R t))_{j,k}.

    For boundary 'infinite-analytic' the matrix covers a window of chain.n
    consecutive sites with entries (-i)^|j-k| J_|j-k|(2 t) exp(-gamma t).
    """
    if chain.noise_mode == 'static':
        raise ValueError("static disorder has no closed-form averaged correlation")
    if t < 0:
        raise ValueError(f"t must be >= 0 (got {t})")

    decay = np.exp(-chain.effective_gamma * t)
    n = chain.n
    J = chain.hopping
    if chain.boundary == 'infinite-analytic':
        sites = np.arange(n)
        sep = np.abs(sites[:, None] - sites[None, :])
        return decay * np.power(-1j, sep) * jv(sep, 2.0 * J * t)

    if chain.boundary == 'ring' and n > 2:
        theta = 2.0 * np.pi * np.arange(n) / n
        sep = np.arange(n)
        modes = np.exp(-2j * J * t * np.cos(theta))
        profile = np.exp(1j * np.outer(sep, theta)) @ modes / n
        sites = np.arange(n)
        return decay * profile[(sites[:, None] - sites[None, :]) % n]

    return decay * step_propagator(chain, t, hopping_matrix)


def matrix_exponential_check(R: Union[HoppingMatrix, np.ndarray], t: float) -> np.ndarray:
    """exp(-i R t) by scaling and squaring; an oracle independent of the eigensolver."""
    if not np.isfinite(t):
        raise ValueError(f"t must be finite (got {t})")
    matrix = R.matrix if isinstance(R, HoppingMatrix) else np.asarray(R)
    return scipy.linalg.expm(-1j * t * matrix)


def evolve_dephasing_density(chain: ChainSpec, rho0: SingleParticleDensity,
                             t_grid: Sequence[float],
                             step: Optional[float] = None) -> List[SingleParticleDensity]:
    """
    Integrate d(rho)/dt = -i J [R, rho] - 2 gamma (rho - diag rho) with fixed-step RK4.

    Args:
        chain: Chain specification (dynamic or none noise)
        rho0: Initial density
        t_grid: Increasing output times (>= rho0.t)
        step: Integrator step (default 0.01 / (4 J + 2 gamma))

    Returns:
        List of SingleParticleDensity, one per requested time
    """
    if chain.boundary == 'infinite-analytic':
        raise ValueError("density evolution needs a finite chain (open or ring)")
    if chain.noise_mode == 'static':
        raise ValueError("static disorder has no single-particle master equation")
    rho0.validate()
    if rho0.rho.shape != (chain.n, chain.n):
        raise ValueError(f"rho0 shape {rho0.rho.shape} does not match chain n={chain.n}")

    times = np.asarray(t_grid, dtype=float)
    if times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < rho0.t:
        raise ValueError("t_grid must be strictly increasing and start at or after rho0.t")

    gamma = chain.effective_gamma
    J = chain.hopping
    R = scipy.sparse.csr_matrix(build_hopping_matrix(chain).matrix * J)
    if step is None:
        step = 0.01 / max(4.0 * J + 2.0 * gamma, 1e-3)

    def rhs(rho: np.ndarray) -> np.ndarray:
        R_rho = R @ rho
        commutator = R_rho - (R @ rho.T).T
        out = -1j * commutator
        if gamma > 0:
            out -= 2.0 * gamma * (rho - np.diag(np.diag(rho)))
        return out

    rho = np.array(rho0.rho, dtype=complex)
    t_now = rho0.t
    results = []
    for t_target in times:
        span = t_target - t_now
        if span > 0:
            substeps = int(np.ceil(span / step - 1e-12))
            h = span / substeps
            for _ in range(substeps):
                k1 = rhs(rho)
                k2 = rhs(rho + 0.5 * h * k1)
                k3 = rhs(rho + 0.5 * h * k2)
                k4 = rhs(rho + h * k3)
                rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t_now = t_target
        results.append(SingleParticleDensity(rho=rho.copy(), t=float(t_target)))

    logger.debug(f"Dephasing density evolved to t={t_now} (n={chain.n}, gamma={gamma}, step={step:.4g})")
    return results
