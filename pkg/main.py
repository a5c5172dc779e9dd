"""
Command-line entry point: rydberg-dsf {prepare,dsf,noise,mitigate,qfi,oracle}.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from pydantic import ValidationError

from app.core.exceptions import EXIT_OK, EXIT_VALIDATION, SimulatorError
from app.core.logging_config import setup_logging
from app.core.sentry import capture_exception, init_sentry
from app.core.service_logging import RunWarningCollector
from app.core.ulid import generate_ulid
from app.schemas.experiment import ExperimentConfig, dump_experiment_config, load_experiment_config
from app.schemas.manifest import FAILURE_MARKER, RunManifest, write_failure_marker
from app.services.experiment_runner import ExperimentRunner, Outputs

logger = logging.getLogger("app.cli")

RESOLVED_CONFIG = "config.resolved.json"

STAGES: Dict[str, Callable[[ExperimentRunner], Outputs]] = {
    "prepare": lambda runner: runner.run_prepare()[2],
    "dsf": lambda runner: runner.run_dsf()[2],
    "noise": lambda runner: runner.run_noise()[3],
    "mitigate": lambda runner: runner.run_mitigate()[2],
    "qfi": lambda runner: runner.run_qfi()[1],
    "oracle": lambda runner: runner.run_oracle(),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydberg-dsf",
        description="Rydberg-array dynamic structure factor pipeline",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON); defaults apply when omitted")
    common.add_argument("--seed", type=int, help="master seed, overrides run.seed")
    common.add_argument("--out", type=Path, help="output directory, overrides run.output_dir")
    common.add_argument("--mode", choices=["model", "physical"], help="unit mode, overrides lattice.unit_mode")
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "prepare": "prepare the ground state and report its fidelity",
        "dsf": "measure Green's functions and transform them to S(k, w)",
        "noise": "simulate noisy shots of the Green's function protocol",
        "mitigate": "calibrate and mitigate noisy shots",
        "qfi": "quantum Fisher information density and entanglement depth",
        "oracle": "exact-diagonalization reference values",
    }
    for name, text in helps.items():
        subparsers.add_parser(name, parents=[common], help=text)
    return parser


def format_validation_error(error: ValidationError) -> List[str]:
    """One 'section.field: message' line per failing field."""
    return [f"{'.'.join(str(p) for p in item['loc'])}: {item['msg']}" for item in error.errors()]


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_experiment_config(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(
        seed=args.seed,
        output_dir=str(args.out) if args.out else None,
        unit_mode=args.mode,
    )


def run_command(command: str, config: ExperimentConfig) -> int:
    """Run one stage with a manifest on success and a failure marker otherwise."""
    output_dir = Path(config.run.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        run_id=generate_ulid(),
        command=command,
        config_hash=config.config_hash(),
        seed=config.run.seed,
    )
    with RunWarningCollector() as warnings:
        try:
            runner = ExperimentRunner(config, output_dir)
            manifest.units = runner.lattice.units.to_dict()
            manifest.add_output("config", dump_experiment_config(config, output_dir / RESOLVED_CONFIG), output_dir)
            for stage, files in STAGES[command](runner).items():
                for path in files:
                    manifest.add_output(stage, path, output_dir)
            manifest.calibration = runner.calibration
            manifest.details = runner.details
        except SimulatorError as e:
            logger.error(f"{command} failed: {e.message}")
            if e.exit_code != EXIT_VALIDATION:
                capture_exception(e, {"command": command, "run_id": manifest.run_id})
            write_failure_marker(output_dir, manifest.run_id, e.to_dict(), warnings.messages)
            return e.exit_code
        except ValidationError as e:
            for line in format_validation_error(e):
                logger.error(line)
            write_failure_marker(output_dir, manifest.run_id,
                                 {"kind": "validation", "message": str(e), "exit_code": EXIT_VALIDATION})
            return EXIT_VALIDATION
    manifest.finish(warnings.messages).write(output_dir)
    (output_dir / FAILURE_MARKER).unlink(missing_ok=True)
    logger.info(f"{command} finished; manifest in {output_dir}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging()
    init_sentry()
    try:
        config = resolve_config(args)
    except ValidationError as e:
        for line in format_validation_error(e):
            logger.error(f"invalid config: {line}")
        return EXIT_VALIDATION
    except (OSError, ValueError) as e:
        logger.error(f"cannot read config: {e}")
        return EXIT_VALIDATION
    return run_command(args.command, config)


if __name__ == "__main__":
    sys.exit(main())
