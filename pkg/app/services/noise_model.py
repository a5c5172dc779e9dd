"""
Monte Carlo simulation of device noise.

Each trajectory draws its quenched perturbations once (Doppler detuning
offsets, laser amplitude factors, missing atoms) from its own counter-based
stream, evolves the full analog program, and at every checkpoint applies the
single-qubit Kraus channel, samples a bitstring and corrupts it with SPAM
errors. Per-trajectory draw order: Doppler (L), amplitude (L), missing (L),
then uniforms of shape (checkpoints, 2L + 1) holding L Kraus draws, one
sampling draw and L SPAM draws per checkpoint.
"""
import logging
from typing import List, Optional, Sequence

import numpy as np

from app.core.exceptions import InvalidConfigError
from app.core.rng import SCHEDULE_STREAM, TrajectorySeed
from app.core.service_logging import TrajectoryLogger
from app.models.lattice import AtomRegister, UnitSystem
from app.models.program import AnalogProgram
from app.models.pulse import EvolutionSchedule, RydbergParams
from app.models.state import QuantumState, site_view
from app.models.trajectory import TrajectoryEnsemble
from app.schemas.noise import NoiseConfig
from app.services.dynamics_engine import apply_single_qubit, evolve, evolve_checkpoints, expectation_z_all
from app.services.greens_dsf import uj_phases
from app.services.lattice_hamiltonian import RydbergSource
from app.tasks.trajectory_tasks import run_trajectory_chunks

logger = logging.getLogger(__name__)
noise_logger = TrajectoryLogger()

_KET0 = np.array([[1, 0], [0, 0]], dtype=np.complex128)
_KET1 = np.array([[0, 0], [0, 1]], dtype=np.complex128)
_LOWER = np.array([[0, 1], [0, 0]], dtype=np.complex128)
_RAISE = np.array([[0, 0], [1, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def channel_probabilities(cfg: NoiseConfig, fraction: float = 1.0) -> np.ndarray:
    """(p0, p_z, p_r0, p_r1), optionally scaled to a fraction of the run."""
    p = np.array([cfg.p_z, cfg.p_r0, cfg.p_r1]) * fraction
    p0 = 1.0 - p.sum()
    if p0 < -1e-12:
        raise InvalidConfigError(f"channel probabilities sum to {p.sum():.6g} > 1")
    return np.concatenate([[max(p0, 0.0)], p])


def kraus_operators(cfg: NoiseConfig) -> List[np.ndarray]:
    """K0 identity, K1 phase flip, K2/K3 reset to |0>, K4/K5 reset to |1>."""
    p0, pz, pr0, pr1 = channel_probabilities(cfg)
    return [
        np.sqrt(p0) * np.eye(2, dtype=np.complex128),
        np.sqrt(pz) * _Z,
        np.sqrt(pr0) * _KET0,
        np.sqrt(pr0) * _LOWER,
        np.sqrt(pr1) * _RAISE,
        np.sqrt(pr1) * _KET1,
    ]


def kraus_completeness_error(cfg: NoiseConfig) -> float:
    total = sum(k.conj().T @ k for k in kraus_operators(cfg))
    return float(np.max(np.abs(total - np.eye(2))))


def apply_channel_to_density(rho: np.ndarray, cfg: NoiseConfig) -> np.ndarray:
    """sum_a K_a rho K_a^dagger for a single-qubit density matrix."""
    return sum(k @ rho @ k.conj().T for k in kraus_operators(cfg))


def doppler_shifts(
    cfg: NoiseConfig, n_sites: int, rng: np.random.Generator, units: Optional[UnitSystem] = None
) -> np.ndarray:
    """Quenched Gaussian detuning offsets, std K_eff sqrt(k_B T / m), in run units."""
    sigma = cfg.doppler_sigma
    if units is not None:
        sigma = units.rate(sigma)
    return rng.normal(0.0, sigma, size=n_sites)


def amplitude_factors(register: AtomRegister, cfg: NoiseConfig, rng: np.random.Generator) -> np.ndarray:
    """Gaussian around exp(-(r/w)^2), r from the register centroid, clamped at 0."""
    mean = np.exp(-(register.distances_from_centroid() / cfg.waist) ** 2)
    return np.clip(rng.normal(mean, cfg.sigma_amplitude), 0.0, None)


def apply_spam(bits: np.ndarray, missing: np.ndarray, uniforms: np.ndarray, cfg: NoiseConfig) -> np.ndarray:
    """Missing atoms read as ground, then ground flips with eps and Rydberg with eps'."""
    bits = np.where(missing, 0, bits).astype(np.int8)
    threshold = np.where(bits == 0, cfg.epsilon, cfg.epsilon_prime)
    return np.where(uniforms < threshold, 1 - bits, bits).astype(np.int8)


def sample_spam(bits: np.ndarray, cfg: NoiseConfig, rng: np.random.Generator) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int8)
    missing = rng.random(bits.shape) < cfg.eta_prep
    return apply_spam(bits, missing, rng.random(bits.shape), cfg)


def kraus_trajectory_step(
    psi: np.ndarray, n_sites: int, site: int, probabilities: np.ndarray, uniforms: np.ndarray
) -> np.ndarray:
    """Pick K_a with probability ||K_a psi||^2 per row, apply it and renormalize."""
    psi = np.array(psi, dtype=np.complex128, copy=True)
    batched = psi.ndim > 1
    psi = psi.reshape(-1, psi.shape[-1])
    uniforms = np.atleast_1d(uniforms)
    view = site_view(psi, n_sites, site)
    weight0 = np.sum(np.abs(view[:, :, 0, :]) ** 2, axis=(1, 2))
    weight1 = np.sum(np.abs(view[:, :, 1, :]) ** 2, axis=(1, 2))
    norm = weight0 + weight1
    p_ground = np.divide(weight0, norm, out=np.zeros_like(norm), where=norm > 0)
    p0, pz, pr0, pr1 = probabilities
    weights = np.stack([
        np.full_like(norm, p0), np.full_like(norm, pz),
        pr0 * p_ground, pr0 * (1 - p_ground), pr1 * p_ground, pr1 * (1 - p_ground),
    ], axis=1)
    cumulative = np.cumsum(weights, axis=1)
    outcome = np.sum(uniforms[:, None] >= cumulative[:, :-1], axis=1)

    rows = outcome == 1
    view[rows, :, 1, :] *= -1
    rows = outcome == 2
    view[rows, :, 1, :] = 0
    rows = outcome == 3
    view[rows, :, 0, :] = view[rows, :, 1, :]
    view[rows, :, 1, :] = 0
    rows = outcome == 4
    view[rows, :, 1, :] = view[rows, :, 0, :]
    view[rows, :, 0, :] = 0
    rows = outcome == 5
    view[rows, :, 0, :] = 0

    norms = np.linalg.norm(psi, axis=1, keepdims=True)
    psi = psi / np.where(norms > 0, norms, 1.0)
    return psi if batched else psi[0]


def apply_kraus_channel(state: QuantumState, site: int, cfg: NoiseConfig, rng: np.random.Generator) -> QuantumState:
    probabilities = channel_probabilities(cfg)
    psi = kraus_trajectory_step(state.amplitudes, state.n_sites, site, probabilities, rng.random(1))
    return QuantumState(psi, state.n_sites)


def sample_bitstrings(psi: np.ndarray, n_sites: int, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling of one basis state per row."""
    probabilities = np.abs(np.atleast_2d(psi)) ** 2
    cumulative = np.cumsum(probabilities, axis=1)
    cumulative /= cumulative[:, -1:]
    index = np.minimum(np.sum(cumulative <= np.atleast_1d(uniforms)[:, None], axis=1), probabilities.shape[1] - 1)
    shifts = n_sites - 1 - np.arange(n_sites)
    return ((index[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def _freeze_missing(psi: np.ndarray, n_sites: int, missing: np.ndarray) -> np.ndarray:
    """Project missing sites onto |0>, moving |1> weight there if nothing is left."""
    for site in range(n_sites):
        rows = missing[:, site]
        if not np.any(rows):
            continue
        view = site_view(psi, n_sites, site)
        empty = np.sum(np.abs(view[:, :, 0, :]) ** 2, axis=(1, 2)) == 0
        moved = rows & empty
        view[moved, :, 0, :] = view[moved, :, 1, :]
        view[rows, :, 1, :] = 0
    norms = np.linalg.norm(psi, axis=1, keepdims=True)
    return psi / np.where(norms > 0, norms, 1.0)


class _ChunkRunner:
    """Runs trajectories [start, stop) of one program as a single batch."""

    def __init__(self, program: AnalogProgram, cfg: NoiseConfig, seed: int,
                 rotations: Optional[np.ndarray] = None):
        self.program = program
        self.cfg = cfg
        self.seed = seed
        self.rotations = rotations
        self.per_step = cfg.kraus_mode == "per-step"

    def _draws(self, start: int, stop: int):
        program, cfg = self.program, self.cfg
        n_sites = program.n_sites
        doppler, amplitude, missing, uniforms = [], [], [], []
        for index in range(start, stop):
            rng = TrajectorySeed(self.seed, index).generator()
            doppler.append(doppler_shifts(cfg, n_sites, rng, program.units))
            amplitude.append(amplitude_factors(program.register, cfg, rng))
            missing.append(rng.random(n_sites) < cfg.eta_prep)
            uniforms.append(rng.random((program.n_checkpoints, 2 * n_sites + 1)))
        missing_arr = np.array(missing)
        amplitude_arr = np.where(missing_arr, 0.0, np.array(amplitude))
        return np.array(doppler), amplitude_arr, missing_arr, np.array(uniforms)

    def _step_hook(self, start: int, stop: int, dt: float):
        if not self.per_step:
            return None
        program = self.program
        probabilities = channel_probabilities(self.cfg, dt / max(program.total_duration, dt))
        generators = [TrajectorySeed(self.seed, index, SCHEDULE_STREAM).generator() for index in range(start, stop)]

        def hook(step: int, t: float, psi: np.ndarray) -> np.ndarray:
            draws = np.stack([g.random(program.n_sites) for g in generators])
            for site in range(program.n_sites):
                psi = kraus_trajectory_step(psi, program.n_sites, site, probabilities, draws[:, site])
            return psi

        return hook

    def __call__(self, start: int, stop: int) -> dict:
        program, cfg = self.program, self.cfg
        n_sites, batch = program.n_sites, stop - start
        doppler, amplitude, missing, uniforms = self._draws(start, stop)

        if program.initial_state is not None:
            psi = np.tile(program.initial_state.amplitudes, (batch, 1))
        else:
            psi = np.zeros((batch, 1 << n_sites), dtype=np.complex128)
            psi[:, 0] = 1.0
        if np.any(missing):
            psi = _freeze_missing(psi, n_sites, missing)

        if program.preparation is not None and program.preparation.duration > 0:
            params = RydbergParams(program.c6, program.preparation, amplitude, doppler)
            source = RydbergSource(program.register, params, program.cutoff)
            duration = program.preparation.duration
            schedule = EvolutionSchedule.subdivided(source, duration, program.dt, duration)
            psi = evolve(psi, schedule, step_hook=self._step_hook(start, stop, schedule.dt))

        if program.rotation_site is not None:
            psi = psi * uj_phases(n_sites, program.rotation_site)

        params = RydbergParams(program.c6, program.evolution, amplitude, doppler)
        source = RydbergSource(program.register, params, program.cutoff)
        spacing = program.checkpoint_spacing
        if spacing > 0:
            schedule = EvolutionSchedule.subdivided(source, program.checkpoints[-1], program.dt, spacing)
        else:
            schedule = EvolutionSchedule(source, 0.0, program.dt)
        states = evolve_checkpoints(psi, schedule, program.checkpoints, self._step_hook(start, stop, schedule.dt))

        probabilities = channel_probabilities(cfg)
        bits = np.zeros((batch, program.n_checkpoints, n_sites), dtype=np.int8)
        for c, phi in enumerate(states):
            draws = uniforms[:, c, :]
            if not self.per_step:
                for site in range(n_sites):
                    phi = kraus_trajectory_step(phi, n_sites, site, probabilities, draws[:, site])
            if self.rotations is not None:
                for site in range(n_sites):
                    phi = apply_single_qubit(phi, n_sites, site, self.rotations[start:stop, site])
            sampled = sample_bitstrings(phi, n_sites, draws[:, n_sites])
            bits[:, c, :] = apply_spam(sampled, missing, draws[:, n_sites + 1:], cfg)
        return {"bits": bits}


def noisy_pipeline_run(
    program: AnalogProgram,
    cfg: NoiseConfig,
    seed: int,
    rotations: Optional[np.ndarray] = None,
    samples: Optional[int] = None,
    chunk_size: Optional[int] = None,
    max_workers: Optional[int] = None,
) -> TrajectoryEnsemble:
    """Shot ensemble of ``program`` under ``cfg``.

    ``rotations`` (shape (samples, L, 2, 2)) rotates every site of trajectory s
    before sampling, as used by randomized calibration. The ensemble depends
    only on (seed, trajectory index), never on chunking or worker count.
    """
    samples = cfg.samples if samples is None else samples
    if rotations is not None and rotations.shape[:2] != (samples, program.n_sites):
        raise InvalidConfigError("rotations must provide one gate per trajectory and site")
    runner = _ChunkRunner(program, cfg, seed, rotations)
    noise_logger.log_operation("run", {"samples": samples, "L": program.n_sites,
                                       "checkpoints": program.n_checkpoints, "kraus": cfg.kraus_mode})
    result = run_trajectory_chunks(samples, runner, chunk_size, max_workers)
    return TrajectoryEnsemble(bitstrings=result["bits"], checkpoints=program.checkpoints, seed=seed)


def noiseless_expectations(program: AnalogProgram) -> np.ndarray:
    """Exact <Z_i> at every checkpoint without noise or sampling, shape (checkpoints, L)."""
    n_sites = program.n_sites
    if program.initial_state is not None:
        psi = program.initial_state.amplitudes.copy()
    else:
        psi = QuantumState.all_ground(n_sites).amplitudes.copy()
    if program.preparation is not None and program.preparation.duration > 0:
        source = RydbergSource(program.register, RydbergParams(program.c6, program.preparation), program.cutoff)
        duration = program.preparation.duration
        psi = evolve(psi, EvolutionSchedule.subdivided(source, duration, program.dt, duration))
    if program.rotation_site is not None:
        psi = psi * uj_phases(n_sites, program.rotation_site)
    source = RydbergSource(program.register, RydbergParams(program.c6, program.evolution), program.cutoff)
    spacing = program.checkpoint_spacing
    if spacing > 0:
        schedule = EvolutionSchedule.subdivided(source, program.checkpoints[-1], program.dt, spacing)
    else:
        schedule = EvolutionSchedule(source, 0.0, program.dt)
    states = evolve_checkpoints(psi, schedule, program.checkpoints)
    return np.stack([expectation_z_all(phi, n_sites) for phi in states])


def noise_levels(cfg: NoiseConfig, factors: Sequence[float]) -> List[NoiseConfig]:
    return [cfg.scale(factor) for factor in factors]
