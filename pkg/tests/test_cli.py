"""
Unit tests for the command-line entry point
"""
import json
from pathlib import Path

import pytest

import main as cli
from app.core.exceptions import NumericalInstabilityError
from app.core.ulid import is_valid_ulid
from app.schemas.experiment import dump_experiment_config
from app.schemas.manifest import FAILURE_MARKER
from app.services.experiment_runner import PREPARED_STATE, ExperimentRunner


@pytest.fixture(autouse=True)
def quiet_logging(monkeypatch):
    """Keep the dictConfig setup out of the test process."""
    monkeypatch.setattr(cli, "setup_logging", lambda *args, **kwargs: None)


@pytest.fixture
def config_file(tmp_path, quick_config):
    return dump_experiment_config(quick_config, tmp_path / "config.json")


def _write_config(path, payload):
    path.write_text(json.dumps(payload))
    return path


class TestArguments:
    """Test cases for argument parsing and config resolution"""

    def test_subcommand_required(self):
        """Test that a missing subcommand exits through argparse"""
        with pytest.raises(SystemExit):
            cli.main([])

    def test_overrides(self, config_file, tmp_path):
        """Test that --seed, --out and --mode override the file"""
        args = cli.build_parser().parse_args(
            ["dsf", "--config", str(config_file), "--seed", "5", "--out", str(tmp_path / "o"), "--mode", "physical"]
        )
        config = cli.resolve_config(args)
        assert config.run.seed == 5
        assert config.run.output_dir == str(tmp_path / "o")
        assert config.lattice.unit_mode == "physical"

    def test_missing_config_file(self, tmp_path):
        """Test that an unreadable config exits with 2"""
        assert cli.main(["prepare", "--config", str(tmp_path / "absent.json")]) == 2

    def test_unknown_key(self, tmp_path):
        """Test that an unknown key exits with 2"""
        path = _write_config(tmp_path / "bad.json", {"lattice": {"n_sites": 3, "colour": "red"}})
        assert cli.main(["prepare", "--config", str(path), "--out", str(tmp_path / "run")]) == 2
        assert not (tmp_path / "run").exists()

    def test_zero_steps_rejected(self, tmp_path, caplog):
        """Test that N = 0 is a validation error naming the field"""
        path = _write_config(tmp_path / "bad.json", {"evolution": {"n_steps": 0}})
        assert cli.main(["dsf", "--config", str(path)]) == 2
        assert "evolution.n_steps" in caplog.text

    def test_validation_messages(self):
        """Test one 'section.field: message' line per failing field"""
        from pydantic import ValidationError

        from app.schemas.experiment import ExperimentConfig

        with pytest.raises(ValidationError) as excinfo:
            ExperimentConfig.model_validate({"evolution": {"n_steps": 0, "eta": -1.0}})
        lines = cli.format_validation_error(excinfo.value)
        assert len(lines) == 2
        assert any(line.startswith("evolution.eta:") for line in lines)


class TestRunCommand:
    """Test cases for manifests, failure markers and exit codes"""

    def test_prepare_writes_manifest(self, config_file, quick_config):
        """Test a successful stage and its manifest"""
        assert cli.main(["prepare", "--config", str(config_file)]) == 0
        out = Path(quick_config.run.output_dir)
        manifest = json.loads((out / "manifest_prepare.json").read_text())
        assert manifest["status"] == "ok"
        assert is_valid_ulid(manifest["run_id"])
        assert manifest["seed"] == 7
        assert manifest["config_hash"] == quick_config.config_hash()
        assert PREPARED_STATE in manifest["outputs"]["prepare"]
        assert cli.RESOLVED_CONFIG in manifest["outputs"]["config"]
        assert manifest["units"]
        assert not (out / FAILURE_MARKER).exists()

    def test_failure_marker_then_recovery(self, quick_config):
        """Test that a failed stage leaves a marker and a later success removes it"""
        disabled = quick_config.model_copy(update={"mitigation": "off"})
        out = Path(quick_config.run.output_dir)
        assert cli.run_command("mitigate", disabled) == 2
        marker = json.loads((out / FAILURE_MARKER).read_text())
        assert marker["error"]["kind"] == "invalid-config"
        assert not (out / "manifest_mitigate.json").exists()
        assert cli.run_command("prepare", quick_config) == 0
        assert not (out / FAILURE_MARKER).exists()

    def test_numerical_failure_exit_code(self, quick_config, monkeypatch):
        """Test that numerical failures exit with 3"""
        def diverge(self):
            raise NumericalInstabilityError("norm drifted", suggested_dt=0.001)

        monkeypatch.setattr(ExperimentRunner, "run_prepare", diverge)
        assert cli.run_command("prepare", quick_config) == 3
        marker = json.loads((Path(quick_config.run.output_dir) / FAILURE_MARKER).read_text())
        assert marker["error"]["exit_code"] == 3
        assert "dt <= 0.001" in marker["error"]["message"]

    def test_oracle_beyond_dense_cap(self, quick_config):
        """Test that exact references for a long chain are refused with 2"""
        data = quick_config.model_dump(mode="json")
        data["lattice"]["n_sites"] = 15
        long_chain = type(quick_config).model_validate(data)
        assert cli.run_command("oracle", long_chain) == 2

    def test_warnings_recorded(self, quick_config):
        """Test that warnings raised during a stage land in the manifest"""
        data = quick_config.model_dump(mode="json")
        data["run"]["samples"] = 1
        single = type(quick_config).model_validate(data)
        assert cli.run_command("noise", single) == 0
        manifest = json.loads((Path(single.run.output_dir) / "manifest_noise.json").read_text())
        assert any("single trajectory" in message for message in manifest["warnings"])