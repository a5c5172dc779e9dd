"""
Experiment configuration file.

One JSON document with a section per pipeline stage. Unknown keys are
rejected everywhere. Times and energies in the ``evolution`` and
``state_prep`` sections are model units (J = 1); physical runs convert them.
"""
import hashlib
import json
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.ansatz import N_HYPERPARAMS
from app.schemas.noise import NoiseConfig

EvolutionMode = Literal["exact-SP/exact-TE", "approx-SP/exact-TE", "approx-SP/approx-TE"]
ALL_EVOLUTION_MODES: List[str] = ["exact-SP/exact-TE", "approx-SP/exact-TE", "approx-SP/approx-TE"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LatticeSection(_Section):
    n_sites: int = Field(5, ge=2, description="chain length L")
    spacing: float = Field(9.8, gt=0, description="lattice spacing a, um")
    unit_mode: Literal["model", "physical"] = "model"
    physical_c6: float = Field(5.42e6, gt=0, description="rad um^6 / us")
    g: float = Field(1.0, ge=0, description="transverse field in units of J")
    nearest_neighbor_only: bool = False
    endpoint_compensation: bool = True


class StatePrepSection(_Section):
    ansatz: Literal["adiabatic", "qaoa", "exact"] = "adiabatic"
    hyperparams: Optional[List[float]] = None
    hyperparam_table: Optional[str] = None
    t_max: Optional[float] = Field(None, gt=0)
    budget: int = Field(200, ge=0)
    dt: Optional[float] = Field(None, gt=0)
    optimize: bool = True
    detuning_pattern: Literal["global", "mapped"] = "global"
    qaoa_level: int = Field(2, ge=1)

    @field_validator("hyperparams", mode="after")
    @classmethod
    def validate_hyperparams(cls, v):
        if v is not None and len(v) != N_HYPERPARAMS:
            raise ValueError(f"hyperparams needs exactly {N_HYPERPARAMS} values")
        return v


class EvolutionSection(_Section):
    delta: float = Field(0.25, gt=0, description="time step between measurements")
    n_steps: int = Field(15, ge=1, description="number of measured time steps N")
    dt: float = Field(0.005, gt=0, description="integrator step bound")
    eta: float = Field(0.2, gt=0, description="Fourier damping")
    omega_max: float = Field(25.0, gt=0)
    omega_points: int = Field(512, ge=2)
    modes: List[EvolutionMode] = Field(default_factory=lambda: list(ALL_EVOLUTION_MODES))
    interaction_cutoff: Optional[float] = Field(None, gt=0, description="um; null keeps the full tail")

    @field_validator("modes", mode="after")
    @classmethod
    def validate_modes(cls, v):
        if not v:
            raise ValueError("at least one evolution mode is required")
        if len(set(v)) != len(v):
            raise ValueError("evolution modes must be unique")
        return v


class MitigationSection(_Section):
    mode: Literal["scale", "inverse-scale", "auto"] = "inverse-scale"
    n_unitaries: int = Field(100, ge=1)
    n_shots: int = Field(200, ge=1)
    confusion: bool = True


class QfiSection(_Section):
    omega_max: float = Field(25.0, gt=0)
    generator: Literal["staggered", "uniform"] = "staggered"
    temperature: float = Field(0.0, ge=0)
    normalization: Union[Literal["ed"], float] = "ed"
    bound_order: int = Field(1, ge=0)
    source_mode: EvolutionMode = "exact-SP/exact-TE"

    @field_validator("normalization", mode="after")
    @classmethod
    def validate_normalization(cls, v):
        if not isinstance(v, str) and not v > 0:
            raise ValueError("a supplied normalization constant must be positive")
        return v


class RunSection(_Section):
    seed: int = Field(0, ge=0)
    output_dir: str = "runs"
    samples: Optional[int] = Field(None, ge=1, description="trajectory count, overrides noise.samples")
    chunk_size: Optional[int] = Field(None, ge=1)


class ExperimentConfig(_Section):
    lattice: LatticeSection = Field(default_factory=LatticeSection)
    state_prep: StatePrepSection = Field(default_factory=StatePrepSection)
    evolution: EvolutionSection = Field(default_factory=EvolutionSection)
    noise: Union[Literal["off"], NoiseConfig] = Field(default_factory=NoiseConfig)
    mitigation: Union[Literal["off"], MitigationSection] = Field(default_factory=MitigationSection)
    qfi: QfiSection = Field(default_factory=QfiSection)
    run: RunSection = Field(default_factory=RunSection)

    @model_validator(mode="after")
    def validate_sections(self):
        if self.evolution.omega_max < self.qfi.omega_max:
            raise ValueError("qfi.omega_max must not exceed evolution.omega_max")
        return self

    @property
    def noise_enabled(self) -> bool:
        return self.noise != "off"

    @property
    def mitigation_enabled(self) -> bool:
        return self.mitigation != "off"

    @property
    def samples(self) -> int:
        if self.run.samples is not None:
            return self.run.samples
        return self.noise.samples if self.noise_enabled else 1

    def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[str] = None,
                       unit_mode: Optional[str] = None) -> "ExperimentConfig":
        """Copy with CLI overrides applied and re-validated."""
        data = self.model_dump(mode="json")
        if seed is not None:
            data["run"]["seed"] = seed
        if output_dir is not None:
            data["run"]["output_dir"] = output_dir
        if unit_mode is not None:
            data["lattice"]["unit_mode"] = unit_mode
        return ExperimentConfig.model_validate(data)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    return ExperimentConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))


def dump_experiment_config(config: ExperimentConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config.model_dump_json(indent=2), encoding="utf-8")
    return path
