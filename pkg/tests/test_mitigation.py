"""
Unit tests for readout correction and randomized-measurement mitigation
"""
import numpy as np
import pytest
from scipy import stats

from app.core.exceptions import IncompleteCalibrationError, InvalidConfigError, SingularCalibrationError
from app.models.lattice import LatticeSpec
from app.models.mitigation import ConfusionModel, HaarRotation, MitigationCalibration
from app.models.program import AnalogProgram
from app.models.pulse import PulseProgram
from app.models.trajectory import TrajectoryEnsemble
from app.schemas.experiment import ExperimentConfig
from app.schemas.noise import NoiseConfig
from app.services.experiment_runner import ExperimentRunner
from app.services.greens_dsf import cumulative_error
from app.services.lattice_hamiltonian import build_chain_register
from app.services.mitigation import (
    calibrate,
    calibration_seed,
    confusion_correct,
    confusion_correct_distribution,
    confusion_from_noise,
    empirical_distribution,
    mitigate_ensemble,
    mitigated_z,
    rescale_factor,
    sample_haar_unitary,
    select_mode,
    survival_probability,
)
from app.services.noise_model import noise_levels, noiseless_expectations, noisy_pipeline_run


def _idle_program(n_sites: int = 3) -> AnalogProgram:
    lattice = LatticeSpec.create(n_sites)
    return AnalogProgram(
        register=build_chain_register(n_sites, lattice.spacing),
        c6=lattice.c6,
        evolution=PulseProgram.constant(0.0, n_sites),
        checkpoints=(0.0,),
        dt=0.01,
        units=lattice.units,
    )


def _calibration(*survival, mode="inverse-scale") -> MitigationCalibration:
    return MitigationCalibration(survival=np.array(survival), n_unitaries=1, n_shots=1, seed=0, mode=mode)


class TestConfusion:
    """Test cases for per-qubit readout correction"""

    def test_matrix_is_column_stochastic(self):
        """Test C = [[1 - eps, eps'], [eps, 1 - eps']]"""
        model = ConfusionModel.uniform(2, 0.01, 0.08)
        np.testing.assert_allclose(model.matrix(0), [[0.99, 0.08], [0.01, 0.92]])
        np.testing.assert_allclose(model.matrix(1).sum(axis=0), 1.0)

    def test_single_qubit_correction(self):
        """Test that observed P(1) = 0.283 is corrected back to 0.300"""
        model = ConfusionModel.uniform(1, 0.01, 0.08)
        observed = model.matrix(0) @ np.array([0.7, 0.3])
        assert observed[1] == pytest.approx(0.283)
        corrected = confusion_correct(np.array([observed[0] - observed[1]]), model)
        assert (1.0 - corrected.values[0]) / 2.0 == pytest.approx(0.300)
        assert corrected.clipped_mass == pytest.approx(0.0)

    def test_shot_estimate_within_three_sigma(self, rng):
        """Test correction of a finite-shot estimate"""
        model = ConfusionModel.uniform(1, 0.01, 0.08)
        shots = 10000
        truth = (rng.random(shots) < 0.3).astype(np.int8)
        flip = np.where(truth == 0, 0.01, 0.08)
        read = np.where(rng.random(shots) < flip, 1 - truth, truth)
        z_observed = np.mean(1.0 - 2.0 * read)
        corrected = confusion_correct(np.array([z_observed]), model).values[0]
        sigma = 2.0 * np.sqrt(0.3 * 0.7 / shots) / (1.0 - 0.09)
        assert abs(corrected - 0.4) < 3 * sigma

    def test_clipping_is_reported(self):
        """Test that unphysical corrected probabilities are clipped"""
        model = ConfusionModel.uniform(1, 0.05, 0.05)
        corrected = confusion_correct(np.array([1.0]), model)
        assert corrected.values[0] == pytest.approx(1.0)
        assert corrected.clipped_mass > 0.0

    def test_full_distribution_correction(self):
        """Test correcting a two-qubit product distribution"""
        model = ConfusionModel.uniform(2, 0.02, 0.1)
        single = np.array([0.6, 0.4])
        observed_single = model.matrix(0) @ single
        observed = np.kron(observed_single, observed_single)
        corrected = confusion_correct_distribution(observed, model)
        np.testing.assert_allclose(corrected.values, np.kron(single, single), atol=1e-12)

    def test_singular_matrix_rejected(self):
        """Test that eps + eps' >= 1 cannot be inverted"""
        model = ConfusionModel.uniform(1, 0.5, 0.5)
        assert not model.invertible
        with pytest.raises(InvalidConfigError):
            model.inverse(0)

    def test_model_from_noise_config(self):
        """Test that the readout model follows the noise section"""
        model = confusion_from_noise(NoiseConfig(), 3)
        assert model.n_sites == 3
        np.testing.assert_allclose(model.epsilon_prime, 0.08)

    def test_empirical_distribution(self):
        """Test basis-state frequencies with site 0 as the high bit"""
        bits = np.array([[0, 0], [1, 1], [1, 1], [0, 1]])
        np.testing.assert_allclose(empirical_distribution(bits), [0.25, 0.25, 0.0, 0.5])


class TestHaarRotations:
    """Test cases for random single-qubit unitaries"""

    def test_rotation_is_unitary(self, rng):
        """Test U^dagger U = 1"""
        u = sample_haar_unitary(rng).matrix()
        np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-12)

    def test_mean_ground_probability(self, rng):
        """Test E|U_00|^2 = 1/2"""
        values = [sample_haar_unitary(rng).ground_probabilities()[0] for _ in range(20000)]
        assert np.mean(values) == pytest.approx(0.5, abs=0.01)

    def test_theta_follows_sine_density(self, rng):
        """Test the polar angle against the sin(theta)/2 density"""
        thetas = [sample_haar_unitary(rng).theta for _ in range(5000)]
        result = stats.kstest(thetas, lambda x: (1.0 - np.cos(x)) / 2.0)
        assert result.pvalue > 0.01

    def test_identity_rotation(self):
        """Test that zero angles keep the ground state"""
        np.testing.assert_allclose(HaarRotation(0.0, 0.0, 0.0).ground_probabilities(), [1.0, 0.0])


class TestSurvivalProbability:
    """Test cases for the randomized-measurement survival estimator"""

    def test_perfect_device_average(self, rng):
        """Test that matching distributions give 4/5 on average over rotations"""
        rotations = [sample_haar_unitary(rng) for _ in range(20000)]
        theory = np.array([[u.ground_probabilities()] for u in rotations])
        assert survival_probability(theory, theory)[0] == pytest.approx(0.8, abs=0.01)

    def test_uniform_outcomes(self, rng):
        """Test that uniformly random outcomes give 2/5"""
        rotations = [sample_haar_unitary(rng) for _ in range(10)]
        theory = np.array([[u.ground_probabilities()] for u in rotations])
        empirical = np.full_like(theory, 0.5)
        assert survival_probability(empirical, theory)[0] == pytest.approx(0.4)

    def test_single_unitary_by_hand(self):
        """Test G = 12/5 * sum_s Phat P - 4/5 for one unitary"""
        theory = np.array([[[0.75, 0.25]]])
        empirical = np.array([[[0.6, 0.4]]])
        assert survival_probability(empirical, theory)[0] == pytest.approx(0.52)

    def test_incomplete_records(self):
        """Test that missing unitaries or outcomes raise"""
        theory = np.full((4, 2, 2), 0.5)
        with pytest.raises(IncompleteCalibrationError):
            survival_probability(theory[:3], theory[:3], n_unitaries=4)
        broken = theory.copy()
        broken[1, 0, 0] = np.nan
        with pytest.raises(IncompleteCalibrationError):
            survival_probability(broken, theory)


class TestRescaling:
    """Test cases for mitigated estimates"""

    def test_unit_survival_is_a_no_op(self):
        """Test that G = 1 leaves the raw estimate unchanged"""
        bits = np.array([[0, 1], [0, 0], [1, 0], [0, 0]])
        calib = _calibration(1.0, 1.0)
        assert mitigated_z(bits, calib, 0) == pytest.approx(0.5)
        assert mitigated_z(bits, calib, 0, "scale") == pytest.approx(0.5)

    def test_scale_mode_arithmetic(self):
        """Test raw 0.5 with G = 0.8 in scale mode gives 1/3"""
        bits = np.array([[0], [0], [0], [1]])
        assert mitigated_z(bits, _calibration(0.8), 0, "scale") == pytest.approx(1.0 / 3.0)
        assert mitigated_z(bits, _calibration(0.8), 0, "inverse-scale") == pytest.approx(0.75)

    def test_singular_survival(self):
        """Test that G = 2 (and G = 0 for the inverse) raise"""
        with pytest.raises(SingularCalibrationError):
            rescale_factor(2.0, "scale")
        with pytest.raises(SingularCalibrationError):
            rescale_factor(0.0, "inverse-scale")
        with pytest.raises(InvalidConfigError):
            rescale_factor(0.9, "auto")
        assert SingularCalibrationError("x").exit_code == 3

    def test_ensemble_mitigation(self):
        """Test per-checkpoint mitigation of an ensemble"""
        bits = np.zeros((4, 2, 2), dtype=np.int8)
        bits[3, :, 0] = 1
        ensemble = TrajectoryEnsemble(bitstrings=bits, checkpoints=(0.0, 0.25), seed=0)
        values, sigma = mitigate_ensemble(ensemble, _calibration(0.8, 1.0), "scale")
        np.testing.assert_allclose(values[:, 0], 1.0 / 3.0)
        np.testing.assert_allclose(values[:, 1], 1.0)
        assert sigma.shape == (2, 2)

    def test_mode_selection(self):
        """Test that the direction with the lower error against the reference wins"""
        bits = np.zeros((4, 1, 1), dtype=np.int8)
        bits[3] = 1
        ensemble = TrajectoryEnsemble(bitstrings=bits, checkpoints=(0.0,), seed=0)
        chosen, errors = select_mode(ensemble, _calibration(0.8), np.array([[1.0 / 3.0]]))
        assert chosen == "scale"
        assert errors["scale"] < errors["inverse-scale"]


class TestCalibration:
    """Test cases for the calibration run"""

    def test_noiseless_device_survives(self):
        """Test G close to 1 without noise"""
        calib = calibrate(_idle_program(), NoiseConfig.noiseless(), seed=4, n_unitaries=20, n_shots=200)
        assert calib.survival.shape == (3,)
        np.testing.assert_allclose(calib.survival, 1.0, atol=0.15)
        assert calib.ideal.shape == (3,)
        np.testing.assert_allclose(calib.raw, calib.survival * calib.ideal)

    def test_noise_lowers_survival(self):
        """Test that channel noise reduces G"""
        clean = calibrate(_idle_program(), NoiseConfig.noiseless(), seed=4, n_unitaries=20, n_shots=200)
        noisy = calibrate(_idle_program(), NoiseConfig(), seed=4, n_unitaries=20, n_shots=200)
        assert np.mean(noisy.survival) < np.mean(clean.survival)

    def test_calibration_is_reproducible(self):
        """Test that a fixed seed reproduces the survival probabilities"""
        first = calibrate(_idle_program(), NoiseConfig(), seed=9, n_unitaries=6, n_shots=30)
        second = calibrate(_idle_program(), NoiseConfig(), seed=9, n_unitaries=6, n_shots=30)
        np.testing.assert_array_equal(first.survival, second.survival)
        assert first.to_dict()["n_unitaries"] == 6

    def test_calibration_seed_is_separate(self):
        """Test that calibration shots use a stream distinct from the run seed"""
        assert calibration_seed(9) == calibration_seed(9)
        assert calibration_seed(9) != calibration_seed(10)

    def test_calibration_needs_records(self):
        """Test that zero unitaries or shots are rejected"""
        with pytest.raises(InvalidConfigError):
            calibrate(_idle_program(), NoiseConfig(), seed=0, n_unitaries=0)


def _benchmark_config(tmp_path, n_sites: int, samples: int) -> ExperimentConfig:
    return ExperimentConfig.model_validate({
        "lattice": {"n_sites": n_sites},
        "state_prep": {"ansatz": "exact"},
        "evolution": {"omega_points": 128, "modes": ["exact-SP/exact-TE"]},
        "noise": {"samples": samples},
        "run": {"seed": 21, "output_dir": str(tmp_path / "benchmark")},
    })


class TestMitigationBenchmark:
    """Test cases for the cumulative error of raw and mitigated Green's functions"""

    def test_error_grows_with_noise_strength(self, tmp_path):
        """Test that the raw error is nondecreasing in the noise scale"""
        runner = ExperimentRunner(_benchmark_config(tmp_path, 3, 4000))
        program = runner.noise_program()
        noiseless = noiseless_expectations(program)
        errors = [
            cumulative_error(noisy_pipeline_run(program, cfg, seed=21).z_mean(), noiseless)
            for cfg in noise_levels(NoiseConfig(samples=4000), (0.0, 0.5, 1.0, 2.0))
        ]
        assert errors == sorted(errors)
        assert errors[-1] > errors[0]

    @pytest.mark.slow
    def test_mitigation_halves_five_site_error(self, tmp_path):
        """Test Err(mitigated) <= Err(raw) / 2 on the five-site benchmark with 5000 trajectories"""
        runner = ExperimentRunner(_benchmark_config(tmp_path, 5, 5000))
        runner.run_mitigate()
        details = runner.details["mitigate"]
        assert details["err_raw"] > 0.0
        assert details["err_mitigated"] <= details["err_raw"] / 2.0
