"""
Integration tests for the complete prepare -> dsf -> noise -> mitigate -> qfi workflow
"""
import json

import numpy as np
import pytest

from app.schemas.experiment import ExperimentConfig
from app.services.dynamics_engine import ground_state_ed
from app.services.experiment_runner import (
    CALIBRATION,
    MITIGATED_CURVES,
    ORACLE,
    PREPARED_STATE,
    QFI_RESULT,
    SHOTS,
    SPECTRUM,
    ExperimentRunner,
    greens_file,
)
from app.utils.csv_io import read_csv, read_shots


@pytest.mark.integration
class TestPipelineWorkflow:
    """Integration tests for the staged pipeline on a three-site chain"""

    def test_complete_workflow(self, quick_config, tfi3):
        """Test every stage in order, each reusing the artifacts of the previous one"""
        runner = ExperimentRunner(quick_config)
        out = runner.output_dir

        # 1. Prepare
        state, record, outputs = runner.run_prepare()
        assert record.fidelity == pytest.approx(1.0)
        assert outputs["prepare"] == [out / PREPARED_STATE]
        _, _, reused = runner.prepared_state()
        assert reused == {}

        # 2. Green's functions and spectra for all three modes
        tables, spectra, outputs = runner.run_dsf()
        assert set(tables) == set(quick_config.evolution.modes)
        assert (out / SPECTRUM).exists()
        for mode in tables:
            assert (out / greens_file(mode)).exists()
        exact = runner.details["dsf"]["exact-SP/exact-TE"]
        assert exact["oracle_max_deviation"] < 1e-6
        assert exact["peak_gap_bins"] == 0
        _, rows = read_csv(out / SPECTRUM)
        assert len(rows) == 3 * quick_config.evolution.omega_points

        # 3. Noisy shots and mitigation
        outputs = runner.run_noise_and_mitigate()
        assert out / SHOTS in outputs["noise"]
        assert out / MITIGATED_CURVES in outputs["mitigate"]
        calibration = json.loads((out / CALIBRATION).read_text())
        assert len(calibration["survival"]) == 3
        assert calibration["mode"] == "inverse-scale"
        assert read_shots(out / SHOTS).samples == 40

        # 4. QFI from the persisted exact Green's function
        result, outputs = runner.run_qfi()
        assert "dsf" not in outputs
        assert 1 <= result.depth <= 3
        assert result.normalization_source == "ed"
        assert result.bound is not None
        assert json.loads((out / QFI_RESULT).read_text())["source"] == "exact-SP/exact-TE"

        # 5. Oracle
        runner.run_oracle()
        oracle = json.loads((out / ORACLE).read_text())
        assert oracle["ground_energy"] == pytest.approx(ground_state_ed(tfi3).energy)
        assert oracle["gap"] > 0.0

    def test_shots_are_reproducible(self, quick_config, tmp_path):
        """Test that the same seed gives identical shots in separate run directories"""
        first = ExperimentRunner(quick_config, tmp_path / "a")
        second = ExperimentRunner(quick_config, tmp_path / "b")
        _, ensemble_a, _, _ = first.run_noise()
        _, ensemble_b, _, _ = second.run_noise()
        np.testing.assert_array_equal(ensemble_a.bitstrings, ensemble_b.bitstrings)

        reseeded = ExperimentRunner(quick_config.with_overrides(seed=8), tmp_path / "c")
        _, ensemble_c, _, _ = reseeded.run_noise()
        assert not np.array_equal(ensemble_a.bitstrings, ensemble_c.bitstrings)

    def test_noise_can_be_switched_off(self, quick_config):
        """Test that noisy stages refuse to run without a noise section"""
        from app.core.exceptions import InvalidConfigError

        data = quick_config.model_dump(mode="json")
        data["noise"] = "off"
        runner = ExperimentRunner(ExperimentConfig.model_validate(data))
        with pytest.raises(InvalidConfigError):
            runner.run_noise()

    def test_supplied_normalization(self, quick_config):
        """Test that a supplied sum-rule constant is used as given"""
        data = quick_config.model_dump(mode="json")
        data["qfi"]["normalization"] = 0.5
        runner = ExperimentRunner(ExperimentConfig.model_validate(data))
        result, _ = runner.run_qfi()
        assert result.normalization == pytest.approx(0.5)
        assert result.normalization_source == "supplied"

    @pytest.mark.slow
    def test_adiabatic_preparation_in_noisy_program(self, quick_config):
        """Test that an adiabatic run carries its sweep into the noisy program"""
        data = quick_config.model_dump(mode="json")
        data["state_prep"] = {"ansatz": "adiabatic", "t_max": 2.0, "budget": 4, "dt": 0.02}
        runner = ExperimentRunner(ExperimentConfig.model_validate(data))
        _, record, outputs = runner.run_prepare()
        assert 0.0 <= record.fidelity <= 1.0
        assert record.hyperparam_source.startswith("default+")
        program = runner.noise_program()
        assert program.preparation is not None
        assert program.initial_state is None
        assert program.rotation_site == 1
