"""
Readout correction and randomized-measurement error mitigation.

Confusion correction inverts the per-qubit readout matrices. The survival
probability G_j comes from random single-qubit rotations applied to the
idle ground state,

    G_j = 12 / (5 N_U) * sum_r sum_s Phat(s | u_r) P(s | u_r) - 4/5,

normalized by the same estimator on exact probabilities. Mitigated Z
estimates rescale every shot by G/(2 - G) or by its inverse.
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from app.core.exceptions import (
    IncompleteCalibrationError,
    InvalidConfigError,
    SingularCalibrationError,
)
from app.core.rng import CALIBRATION_STREAM, stream
from app.core.service_logging import StageLogger
from app.models.mitigation import (
    ConfusionModel,
    CorrectedEstimate,
    HaarRotation,
    MitigationCalibration,
    RescaleMode,
)
from app.models.program import AnalogProgram
from app.models.pulse import PulseProgram
from app.models.trajectory import TrajectoryEnsemble
from app.schemas.noise import NoiseConfig
from app.services.greens_dsf import cumulative_error
from app.services.noise_model import noisy_pipeline_run

logger = logging.getLogger(__name__)
mitigation_logger = StageLogger("mitigation")

DEFAULT_UNITARIES = 100
DEFAULT_SHOTS_PER_UNITARY = 200


def confusion_from_noise(cfg: NoiseConfig, n_sites: int) -> ConfusionModel:
    return ConfusionModel.uniform(n_sites, cfg.epsilon, cfg.epsilon_prime)


def confusion_correct(z_values: np.ndarray, model: ConfusionModel) -> CorrectedEstimate:
    """Correct marginal <Z_i> estimates (last axis = sites) qubit by qubit.

    The corrected probabilities are clipped to [0, 1]; the removed mass is
    summed into ``clipped_mass``.
    """
    z_values = np.asarray(z_values, dtype=np.float64)
    if z_values.shape[-1] != model.n_sites:
        raise InvalidConfigError("confusion model and estimates disagree on the number of qubits")
    observed = np.stack([(1.0 + z_values) / 2.0, (1.0 - z_values) / 2.0], axis=-1)
    corrected = np.empty_like(observed)
    for site in range(model.n_sites):
        corrected[..., site, :] = observed[..., site, :] @ model.inverse(site).T
    clipped = np.clip(corrected, 0.0, 1.0)
    mass = float(np.sum(np.abs(clipped - corrected)))
    if mass > 0:
        logger.debug("confusion correction clipped %.3g probability mass", mass)
    return CorrectedEstimate(values=clipped[..., 0] - clipped[..., 1], clipped_mass=mass)


def confusion_correct_distribution(probabilities: np.ndarray, model: ConfusionModel) -> CorrectedEstimate:
    """Correct a full 2^L distribution by contracting one inverse per qubit axis."""
    n_sites = model.n_sites
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.size != 1 << n_sites:
        raise InvalidConfigError("distribution size does not match the confusion model")
    tensor = probabilities.reshape((2,) * n_sites)
    for site in range(n_sites):
        tensor = np.moveaxis(np.tensordot(model.inverse(site), tensor, axes=([1], [site])), 0, site)
    corrected = tensor.reshape(-1)
    clipped = np.clip(corrected, 0.0, 1.0)
    return CorrectedEstimate(values=clipped, clipped_mass=float(np.sum(np.abs(clipped - corrected))))


def empirical_distribution(bits: np.ndarray) -> np.ndarray:
    """Frequencies of each basis index for shots of shape (S, L)."""
    bits = np.asarray(bits, dtype=np.int64)
    n_sites = bits.shape[1]
    index = bits @ (1 << (n_sites - 1 - np.arange(n_sites)))
    return np.bincount(index, minlength=1 << n_sites) / bits.shape[0]


def sample_haar_unitary(rng: np.random.Generator) -> HaarRotation:
    """phi and omega uniform on [0, 2 pi); theta = arccos(1 - 2u) has density sin(theta)/2."""
    u = rng.random(3)
    return HaarRotation(phi=2.0 * np.pi * u[0], theta=float(np.arccos(1.0 - 2.0 * u[1])), omega=2.0 * np.pi * u[2])


def survival_probability(empirical: np.ndarray, theory: np.ndarray, n_unitaries: Optional[int] = None) -> np.ndarray:
    """G_j for arrays of shape (N_U, L, 2) holding P(s_j | u_r)."""
    empirical = np.asarray(empirical, dtype=np.float64)
    theory = np.asarray(theory, dtype=np.float64)
    n_unitaries = theory.shape[0] if n_unitaries is None else n_unitaries
    if empirical.shape != theory.shape or empirical.shape[0] != n_unitaries:
        raise IncompleteCalibrationError(
            f"expected records for {n_unitaries} unitaries, got {empirical.shape[0]}"
        )
    if not np.all(np.isfinite(empirical)):
        raise IncompleteCalibrationError("calibration records contain missing outcomes")
    return 12.0 / (5.0 * n_unitaries) * np.einsum("rjs,rjs->j", empirical, theory) - 0.8


def calibration_rotations(seed: int, n_sites: int, n_unitaries: int) -> list:
    """rotations[r][j] from the calibration stream of unitary r."""
    rotations = []
    for r in range(n_unitaries):
        rng = stream(seed, r, CALIBRATION_STREAM)
        rotations.append([sample_haar_unitary(rng) for _ in range(n_sites)])
    return rotations


def idle_program(program: AnalogProgram) -> AnalogProgram:
    """Zero-length, undriven program on the same register measured at t = 0."""
    return AnalogProgram(
        register=program.register,
        c6=program.c6,
        evolution=PulseProgram.constant(0.0, program.n_sites),
        checkpoints=(0.0,),
        dt=program.dt,
        units=program.units,
        cutoff=program.cutoff,
    )


def calibration_seed(seed: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(CALIBRATION_STREAM,)).generate_state(1)[0])


def calibrate(
    program: AnalogProgram,
    cfg: NoiseConfig,
    seed: int,
    n_unitaries: int = DEFAULT_UNITARIES,
    n_shots: int = DEFAULT_SHOTS_PER_UNITARY,
    confusion: Optional[ConfusionModel] = None,
    mode: RescaleMode = "inverse-scale",
) -> MitigationCalibration:
    """Survival probabilities of the ground state under the noise model.

    Each of ``n_unitaries`` random product rotations is measured ``n_shots``
    times after the idle program. With ``confusion`` the empirical marginals
    are readout-corrected first.
    """
    if n_unitaries < 1 or n_shots < 1:
        raise InvalidConfigError("calibration needs at least one unitary and one shot")
    n_sites = program.n_sites
    rotations = calibration_rotations(seed, n_sites, n_unitaries)
    gates = np.array([[u.matrix() for u in row] for row in rotations])
    theory = np.array([[u.ground_probabilities() for u in row] for row in rotations])

    ensemble = noisy_pipeline_run(
        idle_program(program), cfg, calibration_seed(seed),
        rotations=np.repeat(gates, n_shots, axis=0), samples=n_unitaries * n_shots,
    )
    bits = ensemble.bitstrings[:, 0, :].reshape(n_unitaries, n_shots, n_sites)
    p_one = bits.mean(axis=1)
    if confusion is not None:
        z = confusion_correct(1.0 - 2.0 * p_one, confusion).values
        p_one = (1.0 - z) / 2.0
    empirical = np.stack([1.0 - p_one, p_one], axis=-1)

    raw = survival_probability(empirical, theory, n_unitaries)
    ideal = survival_probability(theory, theory, n_unitaries)
    survival = raw / ideal
    mitigation_logger.log_operation("calibrate", {
        "n_unitaries": n_unitaries, "n_shots": n_shots, "G": np.round(survival, 6).tolist(),
    })
    return MitigationCalibration(
        survival=survival, n_unitaries=n_unitaries, n_shots=n_shots, seed=seed,
        raw=raw, ideal=ideal, mode=mode,
    )


def rescale_factor(g: float, mode: RescaleMode) -> float:
    if mode == "scale":
        if g == 2.0:
            raise SingularCalibrationError("survival probability G = 2 makes G/(2 - G) undefined")
        return g / (2.0 - g)
    if mode == "inverse-scale":
        if g == 0.0 or g == 2.0:
            raise SingularCalibrationError(f"survival probability G = {g:g} makes (2 - G)/G undefined")
        return (2.0 - g) / g
    raise InvalidConfigError(f"rescale mode {mode!r} needs to be resolved before use")


def mitigated_z(bits: np.ndarray, calib: MitigationCalibration, site: int, mode: Optional[RescaleMode] = None) -> float:
    """Mean over shots of factor * (-1)^s_j for shots of shape (S, L)."""
    factor = rescale_factor(float(calib.survival[site]), mode or calib.mode)
    signs = 1.0 - 2.0 * np.asarray(bits)[:, site]
    return float(np.mean(factor * signs))


def mitigate_ensemble(
    ensemble: TrajectoryEnsemble,
    calib: MitigationCalibration,
    mode: Optional[RescaleMode] = None,
    confusion: Optional[ConfusionModel] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Mitigated <Z_i> and standard errors at every checkpoint, shape (checkpoints, L)."""
    mode = mode or calib.mode
    factors = np.array([rescale_factor(float(g), mode) for g in calib.survival])
    values, sigma = ensemble.z_mean(), ensemble.z_sigma()
    if confusion is not None:
        values = confusion_correct(values, confusion).values
        sigma = sigma / (1.0 - confusion.epsilon - confusion.epsilon_prime)
    return values * factors, sigma * np.abs(factors)


def select_mode(
    ensemble: TrajectoryEnsemble,
    calib: MitigationCalibration,
    reference: np.ndarray,
    confusion: Optional[ConfusionModel] = None,
) -> Tuple[RescaleMode, Dict[str, float]]:
    """Rescale direction with the lower cumulative error against ``reference``."""
    errors = {}
    for mode in ("scale", "inverse-scale"):
        values, _ = mitigate_ensemble(ensemble, calib, mode, confusion)
        errors[mode] = cumulative_error(values, reference)
    chosen = min(errors, key=errors.get)
    mitigation_logger.log_operation("select_mode", {"chosen": chosen, **errors})
    return chosen, errors
