"""
Run manifest and the structured result files written next to the CSVs.
"""
import json
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from app.utils.csv_io import atomic_write_text

MANIFEST_PREFIX = "manifest"
FAILURE_MARKER = "FAILED.json"
PACKAGE_NAME = "rydberg-dsf-simulator"


def code_version() -> str:
    try:
        return metadata.version(PACKAGE_NAME)
    except metadata.PackageNotFoundError:
        return "0.0.0+local"


def manifest_name(command: str) -> str:
    """One manifest per subcommand so stages can share an output directory."""
    return f"{MANIFEST_PREFIX}_{command}.json"


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


class RunManifest(BaseModel):
    """Provenance of one CLI run; each output file is listed once per stage."""
    model_config = ConfigDict(extra="forbid")

    run_id: str
    command: str
    config_hash: str
    seed: int
    code_version: str = Field(default_factory=code_version)
    started_at: datetime = Field(default_factory=utc_now)
    finished_at: Optional[datetime] = None
    status: Literal["running", "ok", "failed"] = "running"
    units: Dict[str, Any] = Field(default_factory=dict)
    outputs: Dict[str, List[str]] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    calibration: Optional[Dict[str, Any]] = None
    details: Dict[str, Any] = Field(default_factory=dict)

    def add_output(self, stage: str, path: Union[str, Path], root: Union[str, Path]) -> None:
        try:
            name = Path(path).relative_to(root).as_posix()
        except ValueError:
            name = Path(path).as_posix()
        listed = {item for files in self.outputs.values() for item in files}
        if name not in listed:
            self.outputs.setdefault(stage, []).append(name)

    def finish(self, warnings: List[str]) -> "RunManifest":
        self.warnings = list(warnings)
        self.finished_at = utc_now()
        self.status = "ok"
        return self

    def write(self, directory: Union[str, Path]) -> Path:
        return atomic_write_text(Path(directory) / manifest_name(self.command), self.model_dump_json(indent=2))


def write_failure_marker(directory: Union[str, Path], run_id: str, error: Dict[str, Any],
                         warnings: Optional[List[str]] = None) -> Path:
    payload = {"run_id": run_id, "failed_at": utc_now().isoformat(), "error": error, "warnings": warnings or []}
    return atomic_write_text(Path(directory) / FAILURE_MARKER, json.dumps(payload, indent=2))


class CalibrationFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    survival: List[float]
    raw: Optional[List[float]] = None
    ideal: Optional[List[float]] = None
    n_unitaries: int
    n_shots: int
    mode: Literal["scale", "inverse-scale", "auto"]
    seed: int
    errors: Dict[str, float] = Field(default_factory=dict)


class QfiFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    f_q: float
    f_q_normalized: float
    sigma_normalized: Optional[float] = None
    k: float
    temperature: float
    omega_max: float
    normalization: float
    normalization_source: str
    n_sites: int
    depth: int
    thresholds_crossed: List[int]
    thresholds: Dict[int, float]
    bound: Optional[float] = None
    bound_order: Optional[int] = None
    bound_normalized: Optional[float] = None
    route_gap: Optional[float] = None
    source: str


class PreparedStateFile(BaseModel):
    """Prepared ground state persisted between the prepare and dsf stages."""
    model_config = ConfigDict(extra="forbid")

    n_sites: int
    ansatz: str
    fidelity: Optional[float] = None
    initial_fidelity: Optional[float] = None
    hyperparams: Optional[Dict[str, Any]] = None
    hyperparam_source: Optional[str] = None
    parity_residual: float
    real: List[float]
    imag: List[float]
